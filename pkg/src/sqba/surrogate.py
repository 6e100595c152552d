"""Surrogate-model gradients for guiding the hard-label search.

A transfer direction is taken at the clean input; surrogate loss gradients are
then sampled at points pushed along that direction (the "fan"), and each
iteration picks the fan member that keeps the iterate adversarial while moving
it closest to the clean input.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExhausted, DegenerateDirection, InputError, NoAdversarialGradient
from .nn import Network
from .oracle import HardLabelOracle

DEFAULT_ETA_GRID = (0.2, 0.4, 0.6, 0.8, 1.0)
MIN_ETA = 0.2


def transfer_direction(surrogate: Network, x, c_true: int):
    """Sign of the surrogate's cross-entropy gradient at ``x``."""
    v = np.sign(surrogate.loss_grad_input(x, c_true))
    if not np.any(v):
        raise DegenerateDirection("surrogate gradient vanishes at the clean input")
    return v


def cos_angle(a, b) -> float:
    a = np.ravel(np.asarray(a, dtype=np.float64))
    b = np.ravel(np.asarray(b, dtype=np.float64))
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise InputError("cosine of a zero vector is undefined")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


@dataclass
class GradientFan:
    eta_grid: list
    gradients: list
    angles: list
    dropped: list = field(default_factory=list)

    def __len__(self):
        return len(self.eta_grid)


def gradient_fan(surrogate: Network, x, v, eta_grid=DEFAULT_ETA_GRID, c_true: int = 0) -> GradientFan:
    """Surrogate loss gradients at ``clip(x + eta * v)`` for each eta.

    Entries whose gradient vanishes are dropped and their eta recorded in
    ``dropped``.
    """
    etas = [float(e) for e in eta_grid]
    if any(not 0.0 < e <= 1.0 for e in etas) or etas != sorted(etas):
        raise InputError("eta grid must be ascending values in (0, 1]")
    fan = GradientFan([], [], [])
    if not etas:
        return fan
    lo, hi = surrogate.data_range
    x = np.asarray(x, dtype=np.float64)
    points = np.clip(x[None] + np.asarray(etas).reshape((-1,) + (1,) * x.ndim) * v, lo, hi)
    grads = surrogate.loss_grad_input(points, np.full(len(etas), c_true))
    for eta, g in zip(etas, grads):
        if not np.any(g):
            fan.dropped.append(eta)
            continue
        fan.eta_grid.append(eta)
        fan.gradients.append(g.reshape(x.shape))
        fan.angles.append(cos_angle(v, g))
    return fan


def select_gradient(fan: GradientFan, oracle: HardLabelOracle, x, x_t, delta: float, min_eta: float = MIN_ETA):
    """Pick the unit fan gradient whose ``2*delta`` probe from ``x_t`` stays
    adversarial and lands closest to ``x``.

    Costs one query per candidate with ``eta >= min_eta``. Raises
    :class:`NoAdversarialGradient` when no candidate passes.
    """
    if delta <= 0:
        raise InputError("delta must be positive")
    cands = [g / np.linalg.norm(g) for eta, g in zip(fan.eta_grid, fan.gradients) if eta >= min_eta]
    if not cands:
        raise NoAdversarialGradient("no fan gradient satisfies the eta constraint")
    lo, hi = oracle.bounds
    probes = np.clip(x_t[None] + 2.0 * delta * np.stack(cands), lo, hi)
    verdict = oracle.indicators(probes)
    best, best_d = None, np.inf
    for i, ok in enumerate(verdict):
        if ok == 1:
            d = np.linalg.norm(probes[i] - x)
            if d < best_d:
                best, best_d = i, d
    if best is None:
        if len(verdict) < len(cands):
            raise BudgetExhausted("budget spent while probing fan gradients")
        raise NoAdversarialGradient("no fan gradient keeps the iterate adversarial")
    return cands[best]


def angle_profile(surrogates, images, labels, eta_grid):
    """Mean and spread of cos(v, mu(eta)) over examples, per eta.

    ``surrogates`` is one network or a list of them; rows are pooled over all
    of them. Returns a list of dicts ``{eta, mean_cos_angle, std, n_examples}``.
    """
    if isinstance(surrogates, Network):
        surrogates = [surrogates]
    etas = [float(e) for e in eta_grid]
    if not etas:
        return []
    samples = {eta: [] for eta in etas}
    for net in surrogates:
        lo, hi = net.data_range
        for x, c in zip(images, labels):
            try:
                v = transfer_direction(net, x, int(c))
            except DegenerateDirection:
                continue
            points = np.clip(x[None] + np.asarray(etas).reshape((-1,) + (1,) * x.ndim) * v, lo, hi)
            grads = net.loss_grad_input(points, np.full(len(etas), int(c)))
            for eta, g in zip(etas, grads):
                if np.any(g):
                    samples[eta].append(cos_angle(v, g))
    return [
        {
            "eta": eta,
            "mean_cos_angle": float(np.mean(s)) if s else float("nan"),
            "std": float(np.std(s)) if s else float("nan"),
            "n_examples": len(s),
        }
        for eta, s in samples.items()
    ]
