"""Domain types: coverage grids, threshold vectors, gap weights and step records.

Orientation convention used everywhere: index ``i = 0..K-1`` of a threshold
vector corresponds to the ``i``-th smallest miscoverage level, so the widest
prediction set comes first and thresholds are stored non-increasing.
Gap-weight vectors have ``K + 1`` entries; entry 0 is the slack mass between
the first threshold and the score bound ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidInputError

ATOL = 1e-9
ROUND_TRIP_ATOL = 1e-12


def _frozen_array(values, name: str, ndim: int = 1) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise InvalidInputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CoverageGrid:
    """Strictly increasing miscoverage levels together with the score bound B."""

    alphas: np.ndarray
    score_bound: float

    def __post_init__(self):
        alphas = _frozen_array(self.alphas, "alphas")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "score_bound", float(self.score_bound))
        if alphas.size < 1:
            raise InvalidInputError("a coverage grid needs at least one level")
        if not np.all(np.isfinite(alphas)):
            raise InvalidInputError("alphas must be finite")
        if alphas[0] <= 0.0 or alphas[-1] >= 1.0:
            raise InvalidInputError("alphas must lie strictly inside (0, 1)")
        if np.any(np.diff(alphas) <= 0.0):
            raise InvalidInputError("alphas must be strictly increasing")
        if not (np.isfinite(self.score_bound) and self.score_bound > 0.0):
            raise InvalidInputError("score_bound must be a positive finite number")

    @property
    def K(self) -> int:
        return int(self.alphas.size)

    @classmethod
    def evenly_spaced(cls, step: float, count: int, score_bound: float) -> "CoverageGrid":
        """Levels ``step * i`` for ``i = 1..count``."""
        return cls(step * np.arange(1, count + 1), score_bound)

    @classmethod
    def from_range(cls, spec: str, score_bound: float) -> "CoverageGrid":
        """Parse ``"start:stop:step"`` (inclusive stop) into a grid."""
        try:
            start, stop, step = (float(x) for x in spec.split(":"))
        except ValueError:
            raise InvalidInputError(f"level range must look like 'start:stop:step', got {spec!r}")
        if step <= 0:
            raise InvalidInputError("level range step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        alphas = np.round(start + step * np.arange(count), 12)
        return cls(alphas, score_bound)

    def __repr__(self) -> str:
        return f"CoverageGrid(K={self.K}, alphas=[{self.alphas[0]:g}..{self.alphas[-1]:g}], B={self.score_bound:g})"


@dataclass(frozen=True, eq=False)
class QuantileState:
    """A threshold vector ``q`` at step ``t``."""

    q: np.ndarray
    t: int = 0

    def __post_init__(self):
        q = _frozen_array(self.q, "q")
        if not np.all(np.isfinite(q)):
            raise InvalidInputError("thresholds must be finite")
        object.__setattr__(self, "q", q)

    @property
    def K(self) -> int:
        return int(self.q.size)

    def is_nested(self, atol: float = ATOL) -> bool:
        return bool(np.all(np.diff(self.q) <= atol))

    def in_bounds(self, score_bound: float, atol: float = ATOL) -> bool:
        return bool(np.all(self.q >= -atol) and np.all(self.q <= score_bound + atol))


@dataclass(frozen=True, eq=False)
class GapWeights:
    """Normalized gaps ``w`` on the truncated simplex with floor ``min_mass``."""

    w: np.ndarray
    min_mass: float

    def __post_init__(self):
        w = _frozen_array(self.w, "w")
        object.__setattr__(self, "w", w)
        mu = float(self.min_mass)
        object.__setattr__(self, "min_mass", mu)
        n = w.size
        if n < 2:
            raise InvalidInputError("gap weights need at least two entries (K >= 1)")
        if not (0.0 < mu < 1.0 / n):
            raise InvalidInputError(f"min_mass must be in (0, 1/{n}), got {mu}")
        if np.any(w < mu - ATOL):
            raise InvalidInputError("gap weights fall below the simplex floor")
        if abs(w.sum() - 1.0) > ATOL:
            raise InvalidInputError(f"gap weights must sum to 1, got {w.sum()!r}")

    @property
    def K(self) -> int:
        return int(self.w.size - 1)

    @classmethod
    def uniform(cls, K: int, min_mass: float) -> "GapWeights":
        return cls(np.full(K + 1, 1.0 / (K + 1)), min_mass)


def quantiles_from_gaps(gw: GapWeights, grid: CoverageGrid, t: int = 0) -> QuantileState:
    """Map gap weights to thresholds, ``q_i = B * sum_{j >= i} w_j`` for i = 1..K."""
    if gw.K != grid.K:
        raise InvalidInputError(f"gap weights have K={gw.K} but grid has K={grid.K}")
    return QuantileState(_suffix_sums(gw.w)[1:] * grid.score_bound, t)


def _suffix_sums(w: np.ndarray) -> np.ndarray:
    return np.cumsum(w[::-1])[::-1]


def gaps_from_quantiles(
    qs: QuantileState, grid: CoverageGrid, min_mass: float | None = None
) -> GapWeights:
    """Inverse of :func:`quantiles_from_gaps`.

    ``q`` must be strictly decreasing inside ``(0, B)``. When ``min_mass`` is
    omitted the floor defaults to half the smallest resulting weight.
    """
    q = qs.q
    B = grid.score_bound
    if q.size != grid.K:
        raise InvalidInputError(f"thresholds have K={q.size} but grid has K={grid.K}")
    if np.any(q <= 0.0) or np.any(q >= B):
        raise InvalidInputError("thresholds must lie strictly inside (0, B)")
    if np.any(np.diff(q) >= 0.0):
        raise InvalidInputError("thresholds must be strictly decreasing")
    w = -np.diff(np.concatenate(([B], q, [0.0]))) / B
    if min_mass is None:
        min_mass = 0.5 * float(w.min())
    return GapWeights(w, min_mass)


def prediction_interval(center, q_i):
    """Symmetric set ``[center - q_i, center + q_i]`` for absolute-error scores.

    Works elementwise on arrays; returns a ``(lo, hi)`` pair.
    """
    q_arr = np.asarray(q_i, dtype=np.float64)
    if np.any(q_arr < 0.0):
        raise InvalidInputError("a threshold defining an interval must be non-negative")
    center = np.asarray(center, dtype=np.float64)
    lo, hi = center - q_arr, center + q_arr
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def miscoverage(score: float, q: np.ndarray) -> np.ndarray:
    """Indicator vector ``1{score > q_i}``; a score on the threshold is covered."""
    return (score > q).astype(np.float64)


@dataclass(frozen=True, eq=False)
class StepRecord:
    t: int
    score: float
    q: np.ndarray
    err: np.ndarray
    q_star: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "q", _frozen_array(self.q, "q"))
        object.__setattr__(self, "err", _frozen_array(self.err, "err"))
        if self.q_star is not None:
            object.__setattr__(self, "q_star", _frozen_array(self.q_star, "q_star"))
        if self.err.shape != self.q.shape:
            raise InvalidInputError("err and q must have the same length")
        if not np.array_equal(self.err, miscoverage(self.score, self.q)):
            raise InvalidInputError("err must equal 1{score > q_i}")

    @classmethod
    def observe(cls, t: int, score: float, q, q_star=None) -> "StepRecord":
        q = np.asarray(q, dtype=np.float64)
        return cls(t, float(score), q, miscoverage(score, q), q_star)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Columnar storage for a run of step records (``T`` steps, ``K`` levels).

    Iterating yields :class:`StepRecord` objects; metrics work on the arrays.
    """

    scores: np.ndarray
    q: np.ndarray
    err: np.ndarray
    q_star: np.ndarray | None = None
    t0: int = field(default=1)

    def __post_init__(self):
        object.__setattr__(self, "scores", _frozen_array(self.scores, "scores"))
        object.__setattr__(self, "q", _frozen_array(self.q, "q", ndim=2))
        object.__setattr__(self, "err", _frozen_array(self.err, "err", ndim=2))
        T = self.scores.size
        if self.q.shape[0] != T or self.err.shape != self.q.shape:
            raise InvalidInputError("trajectory arrays disagree on shape")
        if self.q_star is not None:
            object.__setattr__(self, "q_star", _frozen_array(self.q_star, "q_star", ndim=2))
            if self.q_star.shape != self.q.shape:
                raise InvalidInputError("q_star must match the shape of q")

    @property
    def T(self) -> int:
        return int(self.scores.size)

    @property
    def K(self) -> int:
        return int(self.q.shape[1])

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.t0, self.t0 + self.T)

    def __len__(self) -> int:
        return self.T

    def __iter__(self) -> Iterator[StepRecord]:
        for k in range(self.T):
            yield StepRecord(
                self.t0 + k,
                float(self.scores[k]),
                self.q[k],
                self.err[k],
                None if self.q_star is None else self.q_star[k],
            )

    @classmethod
    def from_records(cls, records: Sequence[StepRecord]) -> "Trajectory":
        records = list(records)
        if not records:
            raise InvalidInputError("need at least one record")
        has_star = records[0].q_star is not None
        return cls(
            np.array([r.score for r in records]),
            np.vstack([r.q for r in records]),
            np.vstack([r.err for r in records]),
            np.vstack([r.q_star for r in records]) if has_star else None,
            t0=records[0].t,
        )

    def with_oracle(self, q_star: np.ndarray) -> "Trajectory":
        return Trajectory(self.scores, self.q, self.err, q_star, self.t0)
