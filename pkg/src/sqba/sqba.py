"""Surrogate-guided hard-label boundary attack.

Loop per iteration: pick a search direction (a surrogate fan gradient while
``beta == 1``, a Monte Carlo estimate once ``beta`` has switched to 0), step
along it until the point is adversarial, then bisect back toward the clean
input. The building blocks here are shared with :mod:`sqba.baselines`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dgm import DgmConfig, dgm_attack
from .errors import (
    AttackFailed,
    BudgetExhausted,
    DegenerateDirection,
    DegenerateGradient,
    InitFailed,
    InputError,
    LineSearchFailed,
    NoAdversarialGradient,
)
from .nn import Network
from .oracle import HardLabelOracle
from .surrogate import DEFAULT_ETA_GRID, MIN_ETA, gradient_fan, select_gradient, transfer_direction


@dataclass
class SqbaConfig:
    query_budget: int = 1000
    rho_budget: float = 0.1
    beta_switch_threshold: float = 1.0
    mc_base: float = 10.0
    delta_coefficient: float = 1e-2
    binary_search_tol: float = 1e-3
    eta_grid: tuple = DEFAULT_ETA_GRID
    min_eta: float = MIN_ETA
    max_line_search_halvings: int = 10
    # relative distance gain below which a surrogate-guided step counts as stalled
    stall_tolerance: float = 1e-3
    # first step-search scale is D(x, x_t), divided by sqrt(t) when step_decay is set
    step_decay: bool = True
    # rebuild the gradient fan along the current perturbation x_t - x every iteration
    refresh_fan: bool = True
    init_beta: int = 1
    random_init_tries: int = 20
    # store a copy of the iterate after every iteration in AttackResult.iterates
    keep_iterates: bool = False
    seed: int = 0
    dgm: DgmConfig = field(default_factory=DgmConfig)

    def __post_init__(self):
        if self.query_budget < 0 or self.rho_budget <= 0 or self.mc_base <= 0:
            raise InputError("budgets and mc_base must be positive")
        if self.delta_coefficient <= 0 or not 0 < self.binary_search_tol < 1:
            raise InputError("delta_coefficient must be positive and binary_search_tol in (0, 1)")
        if self.init_beta not in (0, 1):
            raise InputError("init_beta must be 0 or 1")


@dataclass
class LineSearchResult:
    x_dot: np.ndarray
    alpha: float
    queries_spent: int


@dataclass
class AttackResult:
    success: bool
    x_adv: np.ndarray | None
    queries_used: int
    final_rho: float
    iterations: int
    trace: list = field(default_factory=list)
    reason: str = ""
    method: str = "sqba"
    # (queries_used, rho) each time the best adversarial iterate improved
    improvements: list = field(default_factory=list)
    iterates: list = field(default_factory=list, repr=False)

    def first_success_query(self, rho_budget: float):
        """Query count at which the best iterate first met ``rho_budget``, else None."""
        for q, r in self.improvements:
            if r <= rho_budget:
                return q
        return None


def rho(x, x_adv) -> float:
    """Relative l2 perturbation ``||x_adv - x|| / ||x||``."""
    x = np.asarray(x, dtype=np.float64)
    x_adv = np.asarray(x_adv, dtype=np.float64)
    if x.shape != x_adv.shape:
        raise InputError(f"shape mismatch {x.shape} vs {x_adv.shape}")
    nx = np.linalg.norm(x)
    if nx == 0:
        raise InputError("rho is undefined for a zero input")
    return float(np.linalg.norm(x_adv - x) / nx)


def mc_samples(t: int, base: float) -> int:
    return int(math.ceil(base * math.sqrt(t + 1)))


@dataclass
class McEstimate:
    gradient: np.ndarray
    probes_used: int
    exhausted: bool


def mc_gradient(oracle: HardLabelOracle, x_t, delta: float, p: int, rng) -> McEstimate:
    """Monte Carlo boundary-normal estimate from ``p`` Gaussian probes.

    Probes are clipped to the data range and the effective (clipped) offsets
    are used. The mean indicator is subtracted unless all probes agree. If the
    budget runs out part-way the estimate covers the probes that were
    answered and ``exhausted`` is set.
    """
    if p < 1 or delta <= 0:
        raise InputError("need p >= 1 and delta > 0")
    lo, hi = oracle.bounds
    mu = rng.standard_normal((p,) + x_t.shape)
    probes = np.clip(x_t[None] + delta * mu, lo, hi)
    phi = oracle.indicators(probes).astype(np.float64)
    n = len(phi)
    offsets = (probes[:n] - x_t[None]) / delta
    mean = phi.mean()
    if abs(mean) != 1.0:
        phi = phi - mean
    grad = np.tensordot(phi, offsets, axes=1) / n
    return McEstimate(grad, n, n < p)


def blend(grad_w, grad_b, beta: int):
    """Unit-norm mix of the surrogate and Monte Carlo directions; beta in {0, 1}."""
    if beta not in (0, 1):
        raise InputError("beta must be 0 or 1")
    chosen = grad_w if beta == 1 else grad_b
    if chosen is None:
        raise DegenerateGradient("selected gradient is missing")
    n = np.linalg.norm(chosen)
    if n == 0 or not np.isfinite(n):
        raise DegenerateGradient("selected gradient has zero norm")
    return np.asarray(chosen, dtype=np.float64) / n


def line_search_to_boundary(oracle: HardLabelOracle, x_t, g, alpha0: float, max_halvings: int = 10) -> LineSearchResult:
    """Geometric step search: try ``alpha0, alpha0/2, ...`` along ``g``.

    Returns the first (largest) step whose clipped endpoint is adversarial.
    Raises :class:`LineSearchFailed` after ``max_halvings`` halvings.
    """
    lo, hi = oracle.bounds
    alpha = float(alpha0)
    spent = 0
    for _ in range(max_halvings + 1):
        cand = np.clip(x_t + alpha * g, lo, hi)
        spent += 1
        if oracle.indicator(cand) == 1:
            return LineSearchResult(cand, alpha, spent)
        alpha /= 2.0
    err = LineSearchFailed(f"no adversarial step found down to alpha={alpha * 2:.3g}")
    err.queries_spent = spent
    raise err


def binary_search_projection(oracle: HardLabelOracle, x, x_dot, tol: float = 1e-3):
    """Bisect the segment from ``x_dot`` (adversarial) to ``x`` (clean).

    Returns ``(1 - z) * x_dot + z * x`` for the largest tested ``z`` that is
    still adversarial, once the bracket is narrower than ``tol``. If the budget
    runs out, the best point found so far is returned.
    """
    z_adv, z_clean = 0.0, 1.0
    try:
        while z_clean - z_adv > tol:
            mid = 0.5 * (z_adv + z_clean)
            if oracle.indicator((1.0 - mid) * x_dot + mid * x) == 1:
                z_adv = mid
            else:
                z_clean = mid
    except BudgetExhausted:
        pass
    return (1.0 - z_adv) * x_dot + z_adv * x


def _random_start(oracle, x, rng, tries):
    lo, hi = oracle.bounds
    for _ in range(tries):
        cand = rng.uniform(lo, hi, size=x.shape)
        if oracle.indicator(cand) == 1:
            return cand
    return None


def initialize(surrogate: Network | None, oracle: HardLabelOracle, x, c_true: int, cfg: SqbaConfig, rng, log=None):
    """Find a first adversarial point and project it toward ``x``.

    Tries, in order: the surrogate sign image (pixels pushed to the range
    ends), a DGM adversarial example crafted on the surrogate, then uniform
    noise. One query per candidate plus the projection.
    """
    log = log if log is not None else {}
    x = np.asarray(x, dtype=np.float64)
    lo, hi = oracle.bounds
    start = None
    if surrogate is not None:
        try:
            v = transfer_direction(surrogate, x, c_true)
            cand = np.clip(x + v * (hi - lo), lo, hi)
            if oracle.indicator(cand) == 1:
                start, log["init"] = cand, "sign"
        except DegenerateDirection:
            pass
        if start is None:
            try:
                cand = dgm_attack(surrogate, x, c_true, cfg.dgm)
                if oracle.indicator(cand) == 1:
                    start, log["init"] = cand, "dgm"
            except AttackFailed:
                pass
    if start is None:
        start = _random_start(oracle, x, rng, cfg.random_init_tries)
        log["init"] = "random"
    if start is None:
        raise InitFailed("no adversarial starting point found")
    return binary_search_projection(oracle, x, start, cfg.binary_search_tol)


def sqba_attack(surrogate: Network | None, oracle: HardLabelOracle, x, c_true: int, cfg: SqbaConfig | None = None) -> AttackResult:
    """Run the surrogate-guided attack until the oracle budget is spent.

    With ``surrogate=None`` the attack starts from uniform noise and relies on
    the Monte Carlo estimator only (``init_beta`` must then be 0).
    """
    cfg = cfg or SqbaConfig()
    rng = np.random.default_rng(cfg.seed)
    x = np.asarray(x, dtype=np.float64)
    beta = cfg.init_beta if surrogate is not None else 0
    res = AttackResult(False, None, 0, float("inf"), 0, method="sqba")

    try:
        if oracle.query_class(x) != c_true:
            res.reason = "clean input already misclassified"
            res.queries_used = oracle.queries_used
            return res
        info: dict = {}
        x_t = initialize(surrogate, oracle, x, c_true, cfg, rng, info)
    except BudgetExhausted:
        res.reason = "budget exhausted before initialisation finished"
        res.queries_used = oracle.queries_used
        return res
    except InitFailed as exc:
        res.reason = str(exc)
        res.queries_used = oracle.queries_used
        return res

    d_t = float(np.linalg.norm(x_t - x))
    res.x_adv = x_t
    res.improvements.append((oracle.queries_used, rho(x, x_t)))
    fan = None
    if beta == 1:
        v = transfer_direction(surrogate, x, c_true)
        fan = gradient_fan(surrogate, x, v, cfg.eta_grid, c_true)

    t = 0
    while oracle.remaining > 0:
        t += 1
        delta = cfg.delta_coefficient * d_t
        p_t = 0
        event = ""
        try:
            grad_w = grad_b = None
            if beta == 1:
                if cfg.refresh_fan and t > 1:
                    fan = gradient_fan(surrogate, x, x_t - x, cfg.eta_grid, c_true)
                try:
                    grad_w = select_gradient(fan, oracle, x, x_t, delta, cfg.min_eta)
                except NoAdversarialGradient:
                    beta, event = 0, "no surrogate gradient"
            if beta == 0:
                p_t = mc_samples(t - 1, cfg.mc_base)  # loop counter is 1-based, schedule is 0-based
                est = mc_gradient(oracle, x_t, delta, p_t, rng)
                if est.exhausted:
                    break
                grad_b = est.gradient
            g = blend(grad_w, grad_b, beta)
            try:
                alpha0 = d_t / math.sqrt(t) if cfg.step_decay else d_t
                ls = line_search_to_boundary(oracle, x_t, g, alpha0, cfg.max_line_search_halvings)
            except LineSearchFailed:
                if beta == 1:
                    beta, event = 0, "line search failed"
                res.trace.append(_trace_row(t, d_t, beta, p_t, delta, oracle, event))
                continue
            if beta == 1 and ls.alpha <= cfg.beta_switch_threshold:
                beta, event = 0, f"alpha {ls.alpha:.3g}"
            x_next = binary_search_projection(oracle, x, ls.x_dot, cfg.binary_search_tol)
        except BudgetExhausted:
            break
        except DegenerateGradient:
            res.trace.append(_trace_row(t, d_t, beta, p_t, delta, oracle, "degenerate gradient"))
            continue
        d_next = float(np.linalg.norm(x_next - x))
        if beta == 1 and d_next > (1.0 - cfg.stall_tolerance) * d_t:
            beta, event = 0, "stalled"
        if d_next < d_t:
            x_t, d_t = x_next, d_next
            res.improvements.append((oracle.queries_used, rho(x, x_t)))
        res.trace.append(_trace_row(t, d_t, beta, p_t, delta, oracle, event))
        if cfg.keep_iterates:
            res.iterates.append(x_t.copy())

    res.x_adv = x_t
    res.iterations = t
    res.queries_used = oracle.queries_used
    res.final_rho = rho(x, x_t)
    res.success = res.final_rho <= cfg.rho_budget
    res.reason = "" if res.success else "perturbation budget not met"
    return res


def _trace_row(t, d_t, beta, p_t, delta, oracle, event=""):
    return {"t": t, "distance": d_t, "beta": beta, "p_t": p_t, "delta": delta,
            "queries": oracle.queries_used, "event": event}
