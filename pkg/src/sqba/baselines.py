"""HopSkipJump-style pure hard-label baseline.

Uses the same Monte Carlo estimator, step search and bisection as SQBA but
starts from uniform noise and never consults a surrogate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExhausted, DegenerateGradient, InputError, LineSearchFailed
from .oracle import HardLabelOracle
from .sqba import (
    AttackResult,
    _random_start,
    _trace_row,
    binary_search_projection,
    blend,
    line_search_to_boundary,
    mc_gradient,
    mc_samples,
    rho,
)


@dataclass
class HsjaConfig:
    query_budget: int = 1000
    rho_budget: float = 0.1
    p0: float = 100.0
    delta_coefficient: float = 1e-2
    binary_search_tol: float = 1e-3
    max_line_search_halvings: int = 10
    step_decay: bool = True
    init_tries: int = 50
    seed: int = 0
    keep_iterates: bool = False

    def __post_init__(self):
        if self.query_budget < 0 or self.rho_budget <= 0 or self.p0 <= 0 or self.delta_coefficient <= 0:
            raise InputError("HSJA budgets and coefficients must be positive")


def hsja_attack(oracle: HardLabelOracle, x, c_true: int, cfg: HsjaConfig | None = None) -> AttackResult:
    cfg = cfg or HsjaConfig()
    rng = np.random.default_rng(cfg.seed)
    x = np.asarray(x, dtype=np.float64)
    res = AttackResult(False, None, 0, float("inf"), 0, method="hsja")

    try:
        if oracle.query_class(x) != c_true:
            res.reason = "clean input already misclassified"
            res.queries_used = oracle.queries_used
            return res
        start = _random_start(oracle, x, rng, cfg.init_tries)
        if start is None:
            res.reason = f"no adversarial noise image in {cfg.init_tries} samples"
            res.queries_used = oracle.queries_used
            return res
        x_t = binary_search_projection(oracle, x, start, cfg.binary_search_tol)
    except BudgetExhausted:
        res.reason = "budget exhausted before initialisation finished"
        res.queries_used = oracle.queries_used
        return res

    d_t = float(np.linalg.norm(x_t - x))
    res.improvements.append((oracle.queries_used, rho(x, x_t)))
    t = 0
    while oracle.remaining > 0:
        t += 1
        delta = cfg.delta_coefficient * d_t
        p_t = mc_samples(t - 1, cfg.p0)  # loop counter is 1-based, schedule is 0-based
        try:
            est = mc_gradient(oracle, x_t, delta, p_t, rng)
            if est.exhausted:
                break
            g = blend(None, est.gradient, 0)
            alpha0 = d_t / math.sqrt(t) if cfg.step_decay else d_t
            ls = line_search_to_boundary(oracle, x_t, g, alpha0, cfg.max_line_search_halvings)
            x_next = binary_search_projection(oracle, x, ls.x_dot, cfg.binary_search_tol)
        except BudgetExhausted:
            break
        except LineSearchFailed:
            res.trace.append(_trace_row(t, d_t, 0, p_t, delta, oracle))
            continue
        except DegenerateGradient:
            res.trace.append(_trace_row(t, d_t, 0, p_t, delta, oracle, "degenerate gradient"))
            continue
        d_next = float(np.linalg.norm(x_next - x))
        if d_next < d_t:
            x_t, d_t = x_next, d_next
            res.improvements.append((oracle.queries_used, rho(x, x_t)))
        res.trace.append(_trace_row(t, d_t, 0, p_t, delta, oracle))
        if cfg.keep_iterates:
            res.iterates.append(x_t.copy())

    res.x_adv = x_t
    res.iterations = t
    res.queries_used = oracle.queries_used
    res.final_rho = rho(x, x_t)
    res.success = res.final_rho <= cfg.rho_budget
    res.reason = "" if res.success else "perturbation budget not met"
    return res
