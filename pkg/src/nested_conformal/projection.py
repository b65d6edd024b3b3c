"""Feasibility projections.

* KL projection onto the truncated simplex ``{w : w_i >= mu, sum w = 1}``,
  which has the form ``w_i = max(mu, c * w_tilde_i)`` for a unique ``c > 0``.
* Euclidean projection onto ``{B >= q_1 >= ... >= q_K >= 0}`` by
  pool-adjacent-violators followed by clipping to the box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

UNDERFLOW_FLOOR = 1e-300
SUM_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SimplexProjectionResult:
    w: np.ndarray
    c: float
    active_floor: tuple[int, ...]


def _floor_mass(c: float, w_tilde: np.ndarray, mu: float) -> float:
    return float(np.maximum(mu, c * w_tilde).sum())


def _solve_scale_exact(w_tilde: np.ndarray, mu: float) -> float:
    # F(c) = sum max(mu, c*w_i) is increasing and piecewise linear with
    # breakpoints mu / w_i. With s sorted ascending, on the piece where the k
    # smallest entries sit on the floor, F(c) = k*mu + c * sum_{i>=k} s_i.
    # Take the smallest k whose left breakpoint mu/s_k already has F <= 1.
    s = np.sort(w_tilde)
    tail = np.cumsum(s[::-1])[::-1]
    k_idx = np.arange(s.size)
    with np.errstate(over="ignore"):
        f_at_break = k_idx * mu + mu * (tail / s)
    k = int(np.argmax(f_at_break <= 1.0))
    return (1.0 - k * mu) / tail[k]


def _solve_scale_bisection(w_tilde: np.ndarray, mu: float, iters: int = 200) -> float:
    lo, hi = 0.0, 1.0 / w_tilde.sum()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _floor_mass(mid, w_tilde, mu) < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-17 * hi:
            break
    # Re-derive c from the identified active set to remove bisection slack.
    c = 0.5 * (lo + hi)
    free = c * w_tilde > mu
    n_floor = int((~free).sum())
    if free.any():
        c = (1.0 - n_floor * mu) / w_tilde[free].sum()
    return c


def kl_project_truncated_simplex(w_tilde, mu: float) -> SimplexProjectionResult:
    """KL projection of a positive vector onto the truncated simplex.

    Args:
        w_tilde: strictly positive weights (need not sum to one).
        mu: per-coordinate floor, ``0 < mu < 1/len(w_tilde)``.

    Returns:
        The projected weights, the scale ``c`` and the indices held at the floor.
    """
    w_tilde = np.asarray(w_tilde, dtype=np.float64)
    if w_tilde.ndim != 1 or w_tilde.size < 1:
        raise InvalidInputError("w_tilde must be a non-empty vector")
    if not np.all(np.isfinite(w_tilde)) or np.any(w_tilde <= 0.0):
        raise InvalidInputError("w_tilde entries must be positive and finite")
    n = w_tilde.size
    if not (0.0 < mu < 1.0 / n):
        raise InvalidInputError(f"mu must be in (0, 1/{n}), got {mu}")
    w_tilde = np.maximum(w_tilde, UNDERFLOW_FLOOR)

    c = _solve_scale_exact(w_tilde, mu)
    w = np.maximum(mu, c * w_tilde)
    if not abs(w.sum() - 1.0) <= SUM_RESIDUAL_TOL:
        c = _solve_scale_bisection(w_tilde, mu)
        w = np.maximum(mu, c * w_tilde)
        if not abs(w.sum() - 1.0) <= SUM_RESIDUAL_TOL:
            raise ArithmeticError(f"KL projection residual {w.sum() - 1.0:.3e} exceeds tolerance")
    active = tuple(int(i) for i in np.flatnonzero(c * w_tilde <= mu))
    return SimplexProjectionResult(w, float(c), active)


def isotonic_decreasing(v) -> np.ndarray:
    """Least-squares non-increasing fit (unit weights) by pool-adjacent-violators."""
    sums: list[float] = []
    counts: list[int] = []
    for x in np.asarray(v, dtype=np.float64).tolist():
        total, count = x, 1
        # Merge while the previous block's mean is below the current one.
        while sums and sums[-1] * count < total * counts[-1]:
            total += sums.pop()
            count += counts.pop()
        sums.append(total)
        counts.append(count)
    return np.repeat([s / c for s, c in zip(sums, counts)], counts)


def pava_project_decreasing(v, bound: float, min_gap: float = 0.0) -> np.ndarray:
    """Euclidean projection onto ``{bound >= q_1 >= ... >= q_K >= 0}``.

    With ``min_gap > 0`` the consecutive differences are additionally forced to
    be at least ``min_gap``; the shift ``q_i = r_i + (K - i) * min_gap`` reduces
    that case to the plain cone with a tighter upper bound.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise InvalidInputError("v must be a non-empty vector")
    if not bound > 0.0:
        raise InvalidInputError("bound must be positive")
    if min_gap < 0.0:
        raise InvalidInputError("min_gap must be non-negative")
    K = v.size
    if min_gap == 0.0:
        return np.clip(isotonic_decreasing(v), 0.0, bound)
    upper = bound - min_gap * (K - 1)
    if upper < 0.0:
        raise InvalidInputError("min_gap * (K - 1) exceeds the bound")
    offset = min_gap * np.arange(K - 1, -1, -1, dtype=np.float64)
    return np.clip(isotonic_decreasing(v - offset), 0.0, upper) + offset
