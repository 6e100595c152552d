"""Time the numba loop kernels against the numpy (sliding-window/einsum) versions.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Shapes match a forward/backward pass of the "cnn" preset on 16x16x3 inputs
with a batch of 64. Both versions are checked for agreement before timing.
"""
import argparse
import time

import numpy as np

from sqba import kernels
from sqba._accel import HAVE_NUMBA

CASES = {
    "conv_forward": lambda d: ((d["x"], d["w"], d["b"]), kernels.conv_forward_loop, kernels.conv_forward_numpy),
    "conv_backward_input": lambda d: ((d["g"], d["w"], 18, 18), kernels.conv_backward_input_loop,
                                      kernels.conv_backward_input_numpy),
    "conv_backward_weight": lambda d: ((d["x"], d["g"], 3), kernels.conv_backward_weight_loop,
                                       kernels.conv_backward_weight_numpy),
    "maxpool_forward": lambda d: ((d["a"], 2), kernels.maxpool_forward_loop, kernels.maxpool_forward_numpy),
}


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--batch", type=int, default=64)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba unavailable (or SQBA_DISABLE_NUMBA set): the loop kernels run as plain python")

    rng = np.random.default_rng(0)
    n = args.batch
    data = {
        "x": rng.standard_normal((n, 3, 18, 18)),  # padded 16x16 input
        "w": rng.standard_normal((16, 3, 3, 3)),
        "b": rng.standard_normal(16),
        "g": rng.standard_normal((n, 16, 16, 16)),
        "a": rng.standard_normal((n, 16, 16, 16)),
    }
    repeat = args.repeat if HAVE_NUMBA else 1
    print(f"{'kernel':22s} {'loop (ms)':>10s} {'numpy (ms)':>11s} {'speedup':>8s}")
    for name, build in CASES.items():
        call_args, loop_fn, np_fn = build(data)
        a, b = loop_fn(*call_args), np_fn(*call_args)  # warm-up also triggers jit compilation
        a = a[0] if isinstance(a, tuple) else a
        b = b[0] if isinstance(b, tuple) else b
        assert np.allclose(a, b, atol=1e-9), name
        t_loop = best_of(loop_fn, call_args, repeat)
        t_np = best_of(np_fn, call_args, repeat)
        print(f"{name:22s} {t_loop * 1e3:10.2f} {t_np * 1e3:11.2f} {t_np / t_loop:7.2f}x")


if __name__ == "__main__":
    main()
