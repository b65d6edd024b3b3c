"""Calibration, tracking, set-size and nestedness metrics, plus regret bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CoverageGrid, Trajectory
from .errors import InvalidInputError, UnsupportedMetricError
from .estimators import EstimatorConfig

GAP_VIOLATION_TOL = 1e-12


def calibration_error(traj: Trajectory, grid: CoverageGrid) -> np.ndarray:
    """Per-level ``|mean miscoverage - alpha_i|``."""
    if traj.T < 1:
        raise InvalidInputError("need at least one step")
    return np.abs(traj.err.mean(axis=0) - grid.alphas)


def cumulative_ce_sum(traj: Trajectory, grid: CoverageGrid) -> np.ndarray:
    """``sum_i |running miscoverage rate_i(t) - alpha_i|`` for every prefix ``t``."""
    running = np.cumsum(traj.err, axis=0) / np.arange(1, traj.T + 1)[:, None]
    return np.abs(running - grid.alphas).sum(axis=1)


def rolling_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean over ``window`` steps; shorter prefixes average what exists."""
    if window < 1:
        raise InvalidInputError("window must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    csum = np.cumsum(x, axis=0)
    out = np.empty_like(csum)
    n = x.shape[0]
    head = min(window, n)
    out[:head] = csum[:head] / np.arange(1, head + 1).reshape((-1,) + (1,) * (x.ndim - 1))
    if n > window:
        out[window:] = (csum[window:] - csum[:-window]) / window
    return out


def l1_distance(traj: Trajectory) -> np.ndarray:
    if traj.q_star is None:
        raise UnsupportedMetricError("tracking error needs oracle thresholds")
    return np.abs(traj.q - traj.q_star).sum(axis=1)


def l1_tracking_error(traj: Trajectory, window: int) -> np.ndarray:
    """Rolling mean of ``||q_t - q*_t||_1`` over the trailing ``window`` steps."""
    return rolling_mean(l1_distance(traj), window)


def set_size(traj: Trajectory, window: int) -> np.ndarray:
    """Rolling mean width ``2 q_{t,i}`` per level, shape ``T x K``."""
    return rolling_mean(2.0 * traj.q, window)


def nestedness_gaps(traj: Trajectory) -> tuple[np.ndarray, int]:
    """Per-step ``min_i (q_i - q_{i+1})`` and the number of negative gaps.

    A gap counts as a violation when it is below ``-1e-12``.
    """
    if traj.K < 2:
        raise InvalidInputError("nestedness needs K >= 2")
    gaps = traj.q[:, :-1] - traj.q[:, 1:]
    return gaps.min(axis=1), int((gaps < -GAP_VIOLATION_TOL).sum())


@dataclass(frozen=True, eq=False)
class RunMetrics:
    ce: np.ndarray
    ce_sum_cumulative: np.ndarray
    l1_rolling: np.ndarray | None
    set_size_rolling: np.ndarray
    min_gap: np.ndarray | None
    violations: int

    def summary(self) -> dict:
        out = {
            "ce_max": float(self.ce.max()),
            "ce_sum": float(self.ce.sum()),
            "violations": self.violations,
            "mean_width": float(self.set_size_rolling[-1].mean()),
        }
        if self.l1_rolling is not None:
            out["l1_final"] = float(self.l1_rolling[-1])
        if self.min_gap is not None:
            out["min_gap"] = float(self.min_gap.min())
        return out


def compute_run_metrics(traj: Trajectory, grid: CoverageGrid, window: int) -> RunMetrics:
    if traj.K >= 2:
        min_gap, violations = nestedness_gaps(traj)
    else:
        min_gap, violations = None, 0
    return RunMetrics(
        ce=calibration_error(traj, grid),
        ce_sum_cumulative=cumulative_ce_sum(traj, grid),
        l1_rolling=l1_tracking_error(traj, window) if traj.q_star is not None else None,
        set_size_rolling=set_size(traj, window),
        min_gap=min_gap,
        violations=violations,
    )


# -- regret bounds -----------------------------------------------------------


def _pinball_matrix(q: np.ndarray, scores: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    s = scores[:, None]
    return (s - q) * ((s > q) - alphas)


def joint_losses(q: np.ndarray, scores: np.ndarray, grid: CoverageGrid) -> np.ndarray:
    """Per-step joint loss ``f_t(q_t)`` for a ``T x K`` threshold path."""
    return _pinball_matrix(q, scores, grid.alphas).sum(axis=1)


def oracle_gap_path(q_star: np.ndarray, grid: CoverageGrid) -> np.ndarray:
    """Gap weights ``(B - q_1, q_1 - q_2, ..., q_K) / B`` for each oracle step."""
    B = grid.score_bound
    T = q_star.shape[0]
    padded = np.hstack([np.full((T, 1), B), q_star, np.zeros((T, 1))])
    return -np.diff(padded, axis=1) / B


@dataclass(frozen=True)
class RegretReport:
    """Empirical regret against the oracle path and the matching bounds.

    ``loss_regret`` is ``sum_t f_t(q_t) - f_t(q*_t)`` (equal to the gap-space
    regret for eg since ``q = J w``). ``regret_bound`` is the deterministic
    bound for arbitrary bounded sequences; ``quantile_error`` and
    ``quantile_bound`` are the averaged squared-error form, which bounds an
    expectation and is reported only.
    """

    method: str
    T: int
    eta: float
    loss_regret: float
    regret_bound: float
    regret_pass: bool
    quantile_error: float
    quantile_bound: float
    quantile_pass: bool
    path_w: float
    path_q: float
    density_floor: float
    comparator_feasible: bool
    steps_outside_support: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def regret_and_bounds(
    traj: Trajectory,
    cfg: EstimatorConfig,
    density_floor: float,
    support_halfwidth: float | None = None,
) -> RegretReport:
    """Compare a run to its oracle path and evaluate the regret bounds.

    For eg the bound is ``(1 + log(1/mu))/eta * (1 + V_w) + eta * (B K)^2 * T``
    and the averaged form ``(1 + log(1/mu))(1 + V_w)/(eta T) + (B K)^2 eta / 2``.
    For pg it is ``3 D^2 / eta * (1 + V_q) + eta * G^2 * T`` with ``D = B sqrt(K)``,
    ``G = sqrt(K)``, and ``3 B^2 K (1 + V_q)/(eta T) + eta K`` averaged.
    Other methods carry no bound; their bound fields are NaN.

    ``density_floor`` is the ``p`` in the squared-error form. Steps where some
    ``|q_t - q*_t|`` exceeds ``support_halfwidth`` are counted, since the
    density floor does not hold there.
    """
    if traj.q_star is None:
        raise UnsupportedMetricError("regret needs oracle thresholds")
    grid = cfg.grid
    B, K, T, eta = grid.score_bound, grid.K, traj.T, cfg.eta
    q_star = traj.q_star

    regret = float(joint_losses(traj.q, traj.scores, grid).sum()
                   - joint_losses(q_star, traj.scores, grid).sum())
    sq = float((density_floor / 2.0) * ((traj.q - q_star) ** 2).sum() / T)
    path_q = float(np.abs(np.diff(q_star, axis=0)).sum())
    w_star = oracle_gap_path(q_star, grid)
    path_w = float(np.abs(np.diff(w_star, axis=0)).sum())
    outside = 0
    if support_halfwidth is not None:
        outside = int((np.abs(traj.q - q_star).max(axis=1) > support_halfwidth).sum())

    feasible = bool(np.all(np.diff(q_star, axis=1) <= 0) and q_star.min() >= 0 and q_star.max() <= B)
    if cfg.method == "eg":
        feasible = feasible and bool(w_star.min() >= cfg.mu - 1e-12)
    if cfg.method in ("eg", "pg") and eta == 0.0:
        bound = q_bound = math.inf
    elif cfg.method == "eg":
        mu = cfg.mu
        lead = 1.0 + math.log(1.0 / mu)
        g_inf = B * K
        bound = lead / eta * (1.0 + path_w) + eta * g_inf**2 * T
        q_bound = lead * (1.0 + path_w) / (eta * T) + g_inf**2 * eta / 2.0
    elif cfg.method == "pg":
        diam_sq = B**2 * K
        bound = 3.0 * diam_sq / eta * (1.0 + path_q) + eta * K * T
        q_bound = 3.0 * B**2 * K * (1.0 + path_q) / (eta * T) + eta * K
    else:
        bound = q_bound = math.nan

    return RegretReport(
        method=cfg.method,
        T=T,
        eta=eta,
        loss_regret=regret,
        regret_bound=bound,
        regret_pass=bool(regret <= bound),
        quantile_error=sq,
        quantile_bound=q_bound,
        quantile_pass=bool(sq <= q_bound),
        path_w=path_w,
        path_q=path_q,
        density_floor=density_floor,
        comparator_feasible=feasible,
        steps_outside_support=outside,
    )
