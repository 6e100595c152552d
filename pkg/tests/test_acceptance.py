"""Acceptance criteria 1-11.

Each test appends one ``criterion N: PASS|FAIL ...`` line that pytest prints in
an "acceptance criteria" section at the end of the run, then asserts.
Criteria 3, 5, 7, 8, 9 use the cached shapes model pair from conftest.
"""
import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from sqba import nn
from sqba.baselines import HsjaConfig, hsja_attack
from sqba.cli import main as cli_main
from sqba.dgm import dgm_attack, dgm_tune, penalty_from_ratio
from sqba.harness import build_table, prepare_eval_set, read_asr_csv, run_attacks
from sqba.oracle import HardLabelOracle
from sqba.sqba import SqbaConfig, binary_search_projection, mc_gradient, rho, sqba_attack
from sqba.surrogate import angle_profile, cos_angle


def report(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _linear_binary(w, b, lo=-1e3, hi=1e3):
    """Class 1 iff w.x + b > 0, on a (1, 1, d) input."""
    weight = np.stack([np.zeros_like(w), w])
    return nn.linear((1, 1, len(w)), 2, weight=weight, bias=np.array([0.0, b]), data_range=(lo, hi))


def test_c01_gradient_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst, checked = 0.0, 0
    for i in range(10):
        if i % 2:
            net = nn.small_cnn((2, 8, 8), 5, channels=(3, 4), kernel=3, seed=i)
        else:
            net = nn.mlp((3, 6, 6), 4, hidden=(12, 9), seed=i)
        x = rng.uniform(0, 1, net.input_shape)
        c = int(rng.integers(net.num_classes))
        g = net.loss_grad_input(x, c).ravel()
        for j in rng.choice(x.size, 20, replace=False):
            e = np.zeros(x.size)
            e[j] = 1e-4
            e = e.reshape(x.shape)
            lp = -np.log(nn.softmax(net.forward(x + e))[c])
            lm = -np.log(nn.softmax(net.forward(x - e))[c])
            fd = (lp - lm) / 2e-4
            worst = max(worst, abs(fd - g[j]) / max(abs(fd), 1e-12))
            checked += 1
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-3 and elapsed < 10,
           f"max rel err {worst:.2e} over {checked} coords x 10 nets (rtol 1e-3), {elapsed:.1f}s")


def test_c02_mc_direction():
    t0 = time.perf_counter()
    hits = 0
    for trial in range(100):
        rng = np.random.default_rng(trial)
        w = rng.standard_normal(10)
        b = float(rng.standard_normal())
        net = _linear_binary(w, b)
        # project a random point onto w.x + b = 0
        z = rng.standard_normal(10)
        z -= (w @ z + b) / (w @ w) * w
        oracle = HardLabelOracle(net, 0, 1000)
        est = mc_gradient(oracle, z.reshape(1, 1, 10), 0.01, 1000, rng)
        hits += cos_angle(est.gradient, w) >= 0.3
    elapsed = time.perf_counter() - t0
    report(2, hits >= 95 and elapsed < 30, f"{hits}/100 trials with cos >= 0.3 (need 95), {elapsed:.1f}s")


def test_c03_dgm_white_box(target_cnn, test_set):
    t0 = time.perf_counter()
    sub, _ = prepare_eval_set(target_cnn, test_set, 200, seed=0)
    ok, raw_rho, tuned_rho = 0, [], []
    for x, c in zip(sub.images, sub.labels):
        raw = dgm_attack(target_cnn, x, int(c), tune=False)
        tuned = dgm_tune(target_cnn, x, raw, int(c))
        ok += target_cnn.predict(tuned) != c
        raw_rho.append(rho(x, raw))
        tuned_rho.append(rho(x, tuned))
    cut = 1 - np.mean(tuned_rho) / np.mean(raw_rho)
    elapsed = time.perf_counter() - t0
    report(3, ok == 200 and cut >= 0.2 and elapsed < 300,
           f"success {ok}/200, mean rho {np.mean(raw_rho):.4f} -> {np.mean(tuned_rho):.4f} "
           f"({100 * cut:.1f}% cut, need 20%), {elapsed:.1f}s")


def test_c04_penalty_points():
    a0, a1, ah = penalty_from_ratio(0.0), penalty_from_ratio(1.0), penalty_from_ratio(0.5)
    ok = a0 == 0.3 and abs(a1 - math.exp(-4)) <= 1e-9 and abs(ah - math.exp(-2)) <= 1e-9
    report(4, ok, f"alpha(0)={a0}, alpha(1)={a1:.12f}, alpha(0.5)={ah:.12f}")


ANGLE_GRID = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0)


def test_c05_angle_profile(target_cnn, test_set):
    t0 = time.perf_counter()
    sub, _ = prepare_eval_set(target_cnn, test_set, 500, seed=0)
    rows = {r["eta"]: r["mean_cos_angle"] for r in angle_profile(target_cnn, sub.images, sub.labels, ANGLE_GRID)}
    drop = rows[0.05] - rows[0.3]
    tail = [v for e, v in rows.items() if e >= 0.2]
    spread = max(tail) - min(tail)
    elapsed = time.perf_counter() - t0
    profile = " ".join(f"{e:g}:{v:.3f}" for e, v in rows.items())
    report(5, drop >= 0.2 and spread < 0.1 and elapsed < 300,
           f"cos(0.05)-cos(0.3)={drop:.3f} (need 0.2), spread for eta>=0.2 {spread:.3f} (need <0.1), "
           f"{elapsed:.1f}s [{profile}]")


def test_c06_boundary_projection():
    tol = 1e-3
    worst, adversarial = 0.0, 0
    for trial in range(100):
        rng = np.random.default_rng(1000 + trial)
        w = rng.standard_normal(10)
        net = _linear_binary(w, 0.0)
        x = rng.standard_normal(10)
        x -= (w @ x + rng.uniform(0.5, 3.0)) / (w @ w) * w  # clean side: w.x < 0
        x_dot = x + rng.uniform(1.0, 5.0) * w / np.linalg.norm(w) + 0.3 * rng.standard_normal(10)
        while w @ x_dot <= 0:
            x_dot += w
        oracle = HardLabelOracle(net, 0, 100)
        out = binary_search_projection(oracle, x.reshape(1, 1, 10), x_dot.reshape(1, 1, 10), tol).ravel()
        # the boundary crossing on the segment from x_dot to x
        z_star = (w @ x_dot) / (w @ (x_dot - x))
        crossing = (1 - z_star) * x_dot + z_star * x
        worst = max(worst, np.linalg.norm(out - crossing) / np.linalg.norm(x_dot - x))
        adversarial += HardLabelOracle(net, 0, 1).indicator(out.reshape(1, 1, 10)) == 1
    report(6, worst <= tol and adversarial == 100,
           f"max distance to boundary {worst:.2e} x D (tol {tol}), adversarial {adversarial}/100")


def test_c07_budget_safety(target_cnn, surrogate_cnn5, test_set):
    rng = np.random.default_rng(7)
    sub, _ = prepare_eval_set(target_cnn, test_set, 100, seed=7)
    over = bad = successes = 0
    for run in range(1000):
        budget = int(rng.choice([1, 10, 100]))
        i = int(rng.integers(len(sub)))
        x, c = sub.images[i], int(sub.labels[i])
        oracle = HardLabelOracle(target_cnn, c, budget)
        if run % 2:
            res = sqba_attack(surrogate_cnn5, oracle, x, c, SqbaConfig(query_budget=budget, seed=run))
        else:
            res = hsja_attack(oracle, x, c, HsjaConfig(query_budget=budget, seed=run))
        over += res.queries_used > budget or oracle.queries_used > budget
        if res.success:
            successes += 1
            bad += not (target_cnn.predict(res.x_adv) != c and rho(x, res.x_adv) <= 0.1)
    report(7, over == 0 and bad == 0,
           f"1000 runs: {over} over budget, {successes} successes, {bad} failed re-verification")


def test_c08_estimator_equivalence(target_cnn, test_set):
    sub, _ = prepare_eval_set(target_cnn, test_set, 20, seed=8)
    same = 0
    for i, (x, c) in enumerate(zip(sub.images, sub.labels)):
        c = int(c)
        h_cfg = HsjaConfig(query_budget=600, seed=i, keep_iterates=True)
        s_cfg = SqbaConfig(query_budget=600, seed=i, keep_iterates=True, init_beta=0, mc_base=h_cfg.p0,
                           random_init_tries=h_cfg.init_tries, binary_search_tol=h_cfg.binary_search_tol)
        h = hsja_attack(HardLabelOracle(target_cnn, c, 600), x, c, h_cfg)
        s = sqba_attack(None, HardLabelOracle(target_cnn, c, 600), x, c, s_cfg)
        same += (len(h.iterates) == len(s.iterates) > 0
                 and all(np.array_equal(a, b) for a, b in zip(h.iterates, s.iterates))
                 and [r["distance"] for r in h.trace] == [r["distance"] for r in s.trace]
                 and h.queries_used == s.queries_used)
    report(8, same == 20, f"{same}/20 instances with identical per-iteration iterates")


COMPARE_BUDGETS = (100, 250, 500)


@pytest.fixture(scope="module")
def comparison(target_cnn, surrogate_cnn5, test_set):
    t0 = time.perf_counter()
    sub, idx = prepare_eval_set(target_cnn, test_set, 200, seed=0)
    recs = run_attacks(target_cnn, {"cnn5": surrogate_cnn5}, sub, idx, ["sqba", "hsja"],
                       max(COMPARE_BUDGETS), 0.1, seed=0)
    return build_table(recs, COMPARE_BUDGETS), time.perf_counter() - t0


def test_c09_query_efficiency(target_cnn, surrogate_cnn5, comparison):
    table, elapsed = comparison
    acc_t, acc_s = target_cnn.meta["test_acc"], surrogate_cnn5.meta["test_acc"]
    s = {b: table.asr("sqba", "cnn5", b) for b in COMPARE_BUDGETS}
    h = {b: table.asr("hsja", "-", b) for b in COMPARE_BUDGETS}
    ok = (min(acc_t, acc_s) >= 0.9 and s[100] >= 30 and elapsed < 1800
          and all(s[b] >= 2 * h[b] for b in (100, 250)))
    cells = ", ".join(f"@{b}: {s[b]:.1f}% vs {h[b]:.1f}%" for b in COMPARE_BUDGETS)
    report(9, ok, f"SQBA vs HSJA ASR {cells}; test acc {acc_t:.3f}/{acc_s:.3f}; 200 examples, {elapsed:.0f}s")


def _nested(table):
    return all(
        all(a <= b for a, b in zip(*(([cells[x]["asr"] for x in table.budgets][i:] for i in (0, 1)))))
        for cells in table.rows.values()
    )


@pytest.fixture(scope="module")
def sweep_dir(model_dir, tmp_path_factory):
    d = tmp_path_factory.mktemp("sweep")
    cfg = d / "exp.json"
    cfg.write_text(json.dumps({
        "target": str(model_dir / "cnn.bin"), "surrogates": [str(model_dir / "cnn5.bin")],
        "dataset": str(model_dir / "test.bin"), "query_budgets": [50, 100, 200],
        "sample_count": 12, "seed": 11,
    }))
    for run in ("a", "b"):
        assert cli_main(["sweep", "--config", str(cfg), "--out", str(d / run)]) == 0
    return d


def test_c10_nested_budgets(comparison, sweep_dir):
    tables = [comparison[0], read_asr_csv(sweep_dir / "a" / "asr.csv")]
    ok = all(_nested(t) for t in tables)
    report(10, ok, f"{sum(len(t.rows) for t in tables)} ASR rows checked, all non-decreasing: {ok}")


def test_c11_determinism(sweep_dir):
    names = ("asr.csv", "attacks.csv", "traces.csv")
    same = [(sweep_dir / "a" / n).read_bytes() == (sweep_dir / "b" / n).read_bytes() for n in names]
    report(11, all(same), "byte-identical across two sweeps: " + ", ".join(f"{n}={s}" for n, s in zip(names, same)))
