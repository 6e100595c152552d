"""Dual-gradient white-box attack and its Adam-based perturbation tuning.

DGM runs on a white-box network only (the surrogate); it never spends oracle
queries.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AttackFailed, InputError
from .nn import Network, softmax
from .optim import Adam

PENALTY_CAP = 0.3


@dataclass
class DgmConfig:
    step: float = 0.02
    max_iterations: int = 500
    norm_mode: str = "linf"
    penalty_cap: float = PENALTY_CAP
    tune_lr: float = 1e-3
    tune_max_steps: int = 500

    def __post_init__(self):
        if not 0.0 < self.step <= 1.0:
            raise InputError("DGM step must lie in (0, 1]")
        if self.norm_mode not in ("l2", "linf"):
            raise InputError(f"norm_mode must be 'l2' or 'linf', got {self.norm_mode!r}")
        if self.max_iterations < 1 or self.tune_max_steps < 0 or self.tune_lr < 0:
            raise InputError("iteration counts must be positive and tune_lr non-negative")


@dataclass
class DgmState:
    x: np.ndarray
    t: int = 0
    alpha: float = PENALTY_CAP
    lam: float = 0.0
    history: list = field(default_factory=list)


def normalize_direction(g, norm_mode):
    g = np.asarray(g, dtype=np.float64)
    if norm_mode == "linf":
        return np.sign(g)
    peak = np.max(np.abs(g))
    return g / peak if peak > 0 else np.zeros_like(g)


def directional_gradient(net: Network, x, c: int, norm_mode: str = "linf"):
    """Input gradient of class-``c`` probability, sign-quantised (linf) or peak-scaled (l2)."""
    return normalize_direction(net.prob_grad_input(x, c), norm_mode)


def penalty_from_ratio(lam: float, cap: float = PENALTY_CAP) -> float:
    return min(float(np.exp(-4.0 * lam)), cap)


def probability_ratio(net: Network, x, c_true: int, c_adv: int) -> float:
    p = softmax(net.forward(x))
    return float(p[c_adv] / (p[c_true] + p[c_adv]))


def penalty(net: Network, x, c_true: int, c_adv: int, cap: float = PENALTY_CAP):
    """Return ``(alpha, lam)`` for the current iterate."""
    if c_true == c_adv:
        raise InputError("adversarial class must differ from the true class")
    lam = probability_ratio(net, x, c_true, c_adv)
    return penalty_from_ratio(lam, cap), lam


def perturbation_vector(g_minus, g_plus, alpha: float):
    g_minus = np.asarray(g_minus, dtype=np.float64)
    g_plus = np.asarray(g_plus, dtype=np.float64)
    if g_minus.shape != g_plus.shape:
        raise InputError(f"gradient shapes differ: {g_minus.shape} vs {g_plus.shape}")
    return -alpha * g_minus + (1.0 - alpha) * g_plus


def dgm_step(net: Network, state: DgmState, c_true: int, cfg: DgmConfig, lo: float, hi: float) -> int:
    """Advance one iteration in place; returns the predicted class before the step."""
    logits = net.forward(state.x)
    order = np.argsort(-logits, kind="stable")
    if order[0] != c_true:
        return int(order[0])
    c_adv = int(order[1])
    state.alpha, state.lam = penalty(net, state.x, c_true, c_adv, cfg.penalty_cap)
    g_plus = directional_gradient(net, state.x, c_adv, cfg.norm_mode)
    g_minus = directional_gradient(net, state.x, c_true, cfg.norm_mode)
    mu = perturbation_vector(g_minus, g_plus, state.alpha)
    state.x = np.clip(state.x + cfg.step * mu, lo, hi)
    state.history.append((state.t, state.alpha, state.lam))
    state.t += 1
    return c_true


def dgm_attack(net: Network, x, c_true: int, cfg: DgmConfig | None = None, tune: bool = True, return_state=False):
    """White-box untargeted attack on ``net``.

    Iterates dual-gradient steps until the prediction leaves ``c_true``, then
    (with ``tune``) shrinks the perturbation with :func:`dgm_tune`.
    Raises :class:`AttackFailed` if ``max_iterations`` pass without success.
    """
    cfg = cfg or DgmConfig()
    lo, hi = net.data_range
    x = np.asarray(x, dtype=np.float64)
    state = DgmState(x.copy())
    while True:
        if dgm_step(net, state, c_true, cfg, lo, hi) != c_true:
            break
        if state.t >= cfg.max_iterations:
            raise AttackFailed(f"DGM did not leave class {c_true} in {cfg.max_iterations} iterations")
    out = dgm_tune(net, x, state.x, c_true, cfg) if tune and state.t > 0 else state.x
    return (out, state) if return_state else out


def _mse(a, b):
    return float(np.mean((a - b) ** 2))


def dgm_tune(net: Network, x, x_adv, c_true: int, cfg: DgmConfig | None = None):
    """Pull an adversarial example toward ``x`` with Adam on MSE(x, x_adv).

    Stops as soon as a step lands back in ``c_true`` and returns the closest
    adversarial iterate seen, so the result is never worse than ``x_adv``.
    """
    cfg = cfg or DgmConfig()
    x = np.asarray(x, dtype=np.float64)
    cur = np.array(x_adv, dtype=np.float64)
    if net.predict(cur) == c_true:
        raise InputError("dgm_tune needs an adversarial starting point")
    lo, hi = net.data_range
    best, best_mse = cur.copy(), _mse(x, cur)
    opt = Adam(cfg.tune_lr)
    m = cur.size
    for _ in range(cfg.tune_max_steps):
        (cur,) = opt.step([cur], [2.0 * (cur - x) / m])
        np.clip(cur, lo, hi, out=cur)
        if net.predict(cur) == c_true:
            break
        err = _mse(x, cur)
        if err <= best_mse:
            best, best_mse = cur.copy(), err
    return best
