"""Uniform scores around a reflected Gaussian random walk, with exact quantiles.

Randomness: ``numpy.random.SeedSequence(seed).spawn(2)`` gives two PCG64
streams; the first drives the walk increments (ziggurat normals), the second
the uniform score draws. Given a seed, streams replay bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CoverageGrid
from .csvio import write_rows
from .errors import InvalidInputError


@dataclass(frozen=True)
class WalkConfig:
    a: float = 0.5
    b: float = 9.5
    z1: float = 5.0
    sigma: float = 0.025
    width: float = 1.0
    T: int = 50_000
    seed: int = 0
    score_bound: float = 10.0

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise InvalidInputError("invalid walk config: " + "; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not self.a < self.b:
            out.append("walk needs a < b")
        if not self.a <= self.z1 <= self.b:
            out.append("z1 must lie in [a, b]")
        if not self.sigma >= 0:
            out.append("sigma must be non-negative")
        if not self.width > 0:
            out.append("width must be positive")
        if self.a - self.width / 2 < 0 or self.b + self.width / 2 > self.score_bound:
            out.append("score support [a - width/2, b + width/2] must lie inside [0, B]")
        if int(self.T) != self.T or self.T < 1:
            out.append("T must be a positive integer")
        return out


def reflect(z_tilde: float, a: float, b: float) -> float:
    """Fold ``z_tilde`` into ``[a, b]`` by repeated reflection at the ends.

    Uses the closed form of the period-``2(b - a)`` triangle wave, so arbitrarily
    large excursions cost the same as small ones.
    """
    if not math.isfinite(z_tilde):
        raise InvalidInputError("cannot reflect a non-finite value")
    if not a < b:
        raise InvalidInputError("reflect needs a < b")
    if a <= z_tilde <= b:
        return z_tilde
    span = b - a
    y = math.fmod(z_tilde - a, 2.0 * span)
    if y < 0.0:
        y += 2.0 * span
    if y > span:
        y = 2.0 * span - y
    return a + y


@dataclass(frozen=True, eq=False)
class SyntheticStream:
    z: np.ndarray
    scores: np.ndarray
    config: WalkConfig

    @property
    def T(self) -> int:
        return int(self.scores.size)


def generate_walk(cfg: WalkConfig) -> SyntheticStream:
    eps_seq, unif_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    eps = np.random.Generator(np.random.PCG64(eps_seq)).standard_normal(cfg.T - 1)
    u = np.random.Generator(np.random.PCG64(unif_seq)).random(cfg.T)

    z = np.empty(cfg.T)
    z[0] = cfg.z1
    a, b, sigma = cfg.a, cfg.b, cfg.sigma
    step = (sigma * eps).tolist()
    cur = cfg.z1
    for k in range(cfg.T - 1):
        nxt = cur + step[k]
        if nxt < a or nxt > b:
            nxt = reflect(nxt, a, b)
        z[k + 1] = cur = nxt
    scores = z - cfg.width / 2 + cfg.width * u
    return SyntheticStream(z, scores, cfg)


def true_quantiles(z, cfg: WalkConfig, grid: CoverageGrid) -> np.ndarray:
    """Oracle thresholds ``z + width/2 - alpha_i * width``.

    ``z`` may be a scalar (returns ``K`` values) or a path (returns ``T x K``).
    """
    z = np.asarray(z, dtype=np.float64)
    return z[..., None] + cfg.width / 2 - grid.alphas * cfg.width


def path_variation(q_star: np.ndarray) -> float:
    """``sum_t ||q*_{t+1} - q*_t||_1`` over a ``T x K`` oracle path."""
    return float(np.abs(np.diff(q_star, axis=0)).sum())


def write_stream_csv(path, stream: SyntheticStream, grid: CoverageGrid) -> None:
    """Dump ``t, z, s, qstar_1..qstar_K`` for external verification."""
    q_star = true_quantiles(stream.z, stream.config, grid)
    header = ["t", "z", "s"] + [f"qstar_{i}" for i in range(1, grid.K + 1)]
    rows = ([k + 1, stream.z[k], stream.scores[k], *q_star[k]] for k in range(stream.T))
    write_rows(path, header, rows)
