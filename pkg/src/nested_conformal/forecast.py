"""CPI inflation pipeline: ingestion, yearly inflation, rolling AR(3), scores, bands."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import CoverageGrid, Trajectory, prediction_interval
from .errors import DataIntegrityError, InvalidInputError
from .estimators import EstimatorConfig, OnlineEstimator

logger = logging.getLogger(__name__)

AR_ORDER = 3
DEFAULT_WINDOW = 60
DEFAULT_SCORE_BOUND = 0.25
RIDGE_LAMBDA = 1e-8
# Normal matrices with a larger condition number are treated as rank deficient.
MAX_CONDITION = 1e13
WINDOW_MODES = ("targets", "span")

_DATE_COLUMNS = ("date", "observation_date")


def bundled_cpi_path() -> Path:
    """Path to the bundled monthly CPI-U (seasonally adjusted) sample."""
    return Path(str(resources.files("nested_conformal") / "data" / "CPIAUCSL.csv"))


@dataclass(frozen=True, eq=False)
class MonthlySeries:
    """Values on consecutive months.

    ``kind`` is ``"level"`` for index levels (must be positive) or ``"rate"``
    for derived rates.
    """

    dates: np.ndarray
    values: np.ndarray
    kind: str = "level"

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[M]")
        values = np.asarray(self.values, dtype=np.float64)
        if dates.shape != values.shape or dates.ndim != 1:
            raise InvalidInputError("dates and values must be 1-d and the same length")
        if dates.size > 1:
            steps = np.diff(dates).astype(np.int64)
            bad = np.flatnonzero(steps != 1)
            if bad.size:
                k = bad[0]
                if steps[k] > 1:
                    raise DataIntegrityError(f"monthly series is missing {dates[k] + 1}")
                raise DataIntegrityError(f"dates are not strictly increasing at {dates[k + 1]}")
        if not np.all(np.isfinite(values)):
            raise DataIntegrityError("series contains non-finite values")
        if self.kind == "level" and np.any(values <= 0):
            raise DataIntegrityError("index levels must be positive")
        dates.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    def between(self, start: str | None = None, end: str | None = None) -> "MonthlySeries":
        mask = np.ones(len(self), dtype=bool)
        if start:
            mask &= self.dates >= np.datetime64(start, "M")
        if end:
            mask &= self.dates <= np.datetime64(end, "M")
        return MonthlySeries(self.dates[mask], self.values[mask], self.kind)


def load_fred_csv(path, value_column: str | None = None) -> MonthlySeries:
    """Read a FRED-style CSV (``DATE,<SERIES>`` with ISO first-of-month dates).

    Missing observations (FRED writes ``.``) and skipped months raise
    :class:`DataIntegrityError` naming the month.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataIntegrityError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    lowered = [h.lower() for h in header]
    date_col = next((lowered.index(c) for c in _DATE_COLUMNS if c in lowered), 0)
    if value_column is not None:
        if value_column not in header:
            raise DataIntegrityError(f"{path}: no column named {value_column!r}")
        val_col = header.index(value_column)
    elif "CPIAUCSL" in header:
        val_col = header.index("CPIAUCSL")
    else:
        val_col = 1 if date_col == 0 else 0

    dates, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            month = np.datetime64(row[date_col].strip()[:7], "M")
        except ValueError:
            raise DataIntegrityError(f"{path}:{lineno}: unparseable date {row[date_col]!r}")
        raw = row[val_col].strip() if val_col < len(row) else ""
        try:
            value = float(raw)
        except ValueError:
            raise DataIntegrityError(f"{path}:{lineno}: missing or invalid value for {month}")
        dates.append(month)
        values.append(value)
    if not dates:
        raise DataIntegrityError(f"{path}: no observations")
    return MonthlySeries(np.array(dates, dtype="datetime64[M]"), np.array(values))


def yearly_inflation(series: MonthlySeries) -> MonthlySeries:
    """Year-over-year rate ``(CPI_t - CPI_{t-12}) / CPI_{t-12}``."""
    if len(series) < 13:
        raise InvalidInputError("yearly inflation needs at least 13 months")
    v = series.values
    return MonthlySeries(series.dates[12:], (v[12:] - v[:-12]) / v[:-12], kind="rate")


@dataclass(frozen=True, eq=False)
class ARModel:
    beta: np.ndarray
    window: int
    ridge: bool = False

    def predict(self, last3: Sequence[float]) -> float:
        return one_step_forecast(self, last3)


def ar_design(y: np.ndarray, order: int = AR_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``(1, y_{t-1}, ..., y_{t-order})`` and targets ``y_t`` for ``t >= order``."""
    n = y.size - order
    X = np.empty((n, order + 1))
    X[:, 0] = 1.0
    for lag in range(1, order + 1):
        X[:, lag] = y[order - lag: order - lag + n]
    return X, y[order:]


def fit_ar3(window_data) -> ARModel:
    """Least-squares AR(3) fit through the 4x4 normal equations.

    Rank-deficient systems (e.g. a constant window) fall back to ridge with
    ``lambda = 1e-8`` and set ``ridge=True`` on the returned model.
    """
    y = np.asarray(window_data, dtype=np.float64)
    if y.ndim != 1 or y.size < AR_ORDER + 1:
        raise InvalidInputError("AR(3) needs at least 4 observations")
    X, target = ar_design(y)
    gram = X.T @ X
    rhs = X.T @ target
    ridge = not np.linalg.cond(gram) < MAX_CONDITION
    if not ridge:
        try:
            beta = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            ridge = True
    if ridge:
        beta = np.linalg.solve(gram + RIDGE_LAMBDA * np.eye(AR_ORDER + 1), rhs)
    beta.setflags(write=False)
    return ARModel(beta, int(target.size), ridge)


def one_step_forecast(model: ARModel, last3: Sequence[float]) -> float:
    """``beta_0 + beta_1 y_{t-1} + beta_2 y_{t-2} + beta_3 y_{t-3}``; ``last3`` is newest first."""
    b = model.beta
    return float(b[0] + b[1] * last3[0] + b[2] * last3[1] + b[3] * last3[2])


@dataclass(frozen=True, eq=False)
class ForecastTable:
    dates: np.ndarray
    y: np.ndarray
    yhat: np.ndarray
    ridge: np.ndarray

    @property
    def scores(self) -> np.ndarray:
        return np.abs(self.y - self.yhat)


def _targets_for(window: int, window_mode: str) -> int:
    if window_mode not in WINDOW_MODES:
        raise InvalidInputError(f"window_mode must be one of {WINDOW_MODES}")
    targets = window if window_mode == "targets" else window - AR_ORDER
    if targets < 1:
        raise InvalidInputError("window leaves no regression targets")
    return targets


def rolling_forecasts(
    rates: MonthlySeries, window: int = DEFAULT_WINDOW, window_mode: str = "targets"
) -> ForecastTable:
    """One-step-ahead forecasts from an AR(3) refit on the trailing window.

    ``window_mode="targets"`` fits on ``window`` regression targets (the window
    spans ``window + 3`` months with lags); ``"span"`` caps the total span at
    ``window`` months. Month ``t`` is forecast from data strictly before ``t``.
    """
    y = rates.values
    n_obs = _targets_for(window, window_mode) + AR_ORDER
    if y.size <= n_obs:
        raise InvalidInputError(f"need more than {n_obs} rate observations, have {y.size}")
    idx = np.arange(n_obs, y.size)
    yhat = np.empty(idx.size)
    ridge = np.zeros(idx.size, dtype=bool)
    for k, t in enumerate(idx):
        model = fit_ar3(y[t - n_obs: t])
        yhat[k] = one_step_forecast(model, (y[t - 1], y[t - 2], y[t - 3]))
        ridge[k] = model.ridge
    if ridge.any():
        logger.warning("ridge fallback used for %d of %d AR(3) fits", int(ridge.sum()), idx.size)
    return ForecastTable(rates.dates[idx], y[idx], yhat, ridge)


@dataclass(frozen=True, eq=False)
class InflationRun:
    label: str
    grid: CoverageGrid
    forecasts: ForecastTable
    trajectory: Trajectory
    n_clamped: int

    @property
    def dates(self) -> np.ndarray:
        return self.forecasts.dates

    def bands(self) -> tuple[np.ndarray, np.ndarray]:
        """``(lo, hi)`` arrays of shape ``T x K`` centered on the forecasts.

        The unconstrained tracker can drive a threshold below zero, which makes
        its set empty; such bands are drawn with zero width at the forecast.
        """
        q = np.maximum(self.trajectory.q, 0.0)
        return prediction_interval(self.forecasts.yhat[:, None], q)


def run_inflation_experiment(
    series: MonthlySeries,
    est_cfg: EstimatorConfig,
    window: int = DEFAULT_WINDOW,
    window_mode: str = "targets",
    forecasts: ForecastTable | None = None,
) -> InflationRun:
    """Run one estimator over the absolute forecast errors of the CPI pipeline.

    ``series`` may be CPI levels (converted to yearly inflation) or rates.
    Precomputed ``forecasts`` can be passed to share them across estimators.
    """
    if forecasts is None:
        rates = yearly_inflation(series) if series.kind == "level" else series
        forecasts = rolling_forecasts(rates, window, window_mode)
    est = OnlineEstimator(est_cfg)
    traj = est.run(forecasts.scores)
    if est.n_clamped:
        logger.warning("%s: clamped %d scores into [0, B]", est_cfg.label, est.n_clamped)
    return InflationRun(est_cfg.label, est_cfg.grid, forecasts, traj, est.n_clamped)


def band_rows(run: InflationRun):
    """Long-format rows ``date, method, alpha, yhat, lo, hi, err``."""
    lo, hi = run.bands()
    alphas = run.grid.alphas
    yhat = run.forecasts.yhat
    err = run.trajectory.err
    for k, date in enumerate(run.dates):
        day = f"{date}-01"
        for i in range(alphas.size):
            yield [day, run.label, float(alphas[i]), float(yhat[k]), float(lo[k, i]), float(hi[k, i]), int(err[k, i])]
