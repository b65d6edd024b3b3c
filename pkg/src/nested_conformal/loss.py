"""Pinball loss, its subgradients, and the joint and gap-space losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CoverageGrid, GapWeights, QuantileState, quantiles_from_gaps
from .errors import InvalidInputError


def _check_alpha(alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=np.float64)
    if np.any(a <= 0.0) or np.any(a >= 1.0):
        raise InvalidInputError("alpha must lie strictly inside (0, 1)")
    return a


def pinball_loss(q, s, alpha):
    """Quantile loss ``(s - q) * (1{s > q} - alpha)`` at level ``1 - alpha``.

    Broadcasts over arrays; the result is always non-negative.
    """
    a = _check_alpha(alpha)
    q = np.asarray(q, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    out = (s - q) * ((s > q) - a)
    return float(out) if out.ndim == 0 else out


def pinball_subgradient(q, s, alpha):
    """Subgradient in ``q``: ``alpha - 1{s > q}``; equals ``alpha`` at the kink."""
    a = _check_alpha(alpha)
    out = a - (np.asarray(s, dtype=np.float64) > np.asarray(q, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class LevelGradient:
    """Per-level subgradients ``g_i = alpha_i - err_i``."""

    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=np.float64)
        g.setflags(write=False)
        object.__setattr__(self, "g", g)


def _check_dims(qs: QuantileState, grid: CoverageGrid) -> None:
    if qs.K != grid.K:
        raise InvalidInputError(f"state has K={qs.K} but grid has K={grid.K}")


def joint_loss(qs: QuantileState, s: float, grid: CoverageGrid) -> float:
    """Sum of per-level pinball losses."""
    _check_dims(qs, grid)
    return float(np.sum(pinball_loss(qs.q, s, grid.alphas)))


def joint_gradient(qs: QuantileState, s: float, grid: CoverageGrid) -> LevelGradient:
    _check_dims(qs, grid)
    return LevelGradient(grid.alphas - (s > qs.q))


def gap_gradient_from_levels(g: np.ndarray, score_bound: float) -> np.ndarray:
    """Chain rule through ``q = J w`` with ``J[i, j] = B * 1{i <= j}``.

    Threshold ``q_j`` depends on ``w_m`` exactly when ``m >= j``, so entry ``m``
    collects the level gradients of ``q_1..q_m``: a prefix sum. Entry 0 is
    always zero because no threshold depends on the slack weight.
    """
    out = np.empty(g.size + 1)
    out[0] = 0.0
    np.cumsum(g, out=out[1:])
    out[1:] *= score_bound
    return out


def gap_gradient(lg: LevelGradient, grid: CoverageGrid) -> np.ndarray:
    """Gradient of the gap-space loss, a vector of length ``K + 1``.

    Every entry is bounded in magnitude by ``B * K``.
    """
    if lg.g.size != grid.K:
        raise InvalidInputError(f"gradient has {lg.g.size} entries, grid has K={grid.K}")
    return gap_gradient_from_levels(lg.g, grid.score_bound)


def gap_jacobian(grid: CoverageGrid) -> np.ndarray:
    """The ``K x (K+1)`` matrix ``J`` with ``q = J w``."""
    K = grid.K
    rows = np.arange(1, K + 1)[:, None]
    cols = np.arange(0, K + 1)[None, :]
    return grid.score_bound * (rows <= cols).astype(np.float64)


def gap_loss(gw: GapWeights, s: float, grid: CoverageGrid) -> float:
    return joint_loss(quantiles_from_gaps(gw, grid), s, grid)
