"""Run experiments end to end and write their CSV artifacts.

Layout under ``out_dir``::

    records/<run>.csv           per-step scores, thresholds, miscoverage (and oracle)
    metrics/<run>/<metric>.csv  tidy per-metric tables
    summary.csv                 one row per run
    bands.csv                   inflation only: long-format fan chart

``<run>`` is ``<method label>_seed<N>`` for synthetic runs and the method
label for inflation runs. Every file is written through a temp file and an
atomic rename, and contains nothing that depends on wall-clock time.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .core import CoverageGrid, Trajectory
from .csvio import write_rows
from .errors import DataIntegrityError
from .estimators import EstimatorConfig, run_estimator
from .forecast import (
    ForecastTable,
    band_rows,
    bundled_cpi_path,
    load_fred_csv,
    rolling_forecasts,
    run_inflation_experiment,
    yearly_inflation,
)
from .metrics import RunMetrics, compute_run_metrics, regret_and_bounds
from .synthetic import generate_walk, true_quantiles

logger = logging.getLogger(__name__)

THREADS_ENV = "NESTED_CONFORMAL_THREADS"

SUMMARY_COLUMNS = [
    "experiment", "method", "seed", "T", "K", "eta", "mu",
    "ce_max", "ce_sum", "l1_final", "violations", "min_gap", "mean_width", "n_clamped",
    "loss_regret", "regret_bound", "regret_pass",
    "quantile_error", "quantile_bound", "quantile_pass",
]


def worker_count(n_jobs: int, requested: int | None = None) -> int:
    """Pool size: the smallest of the job count, CPUs, config and env caps."""
    cap = os.cpu_count() or 1
    if requested is not None:
        cap = min(cap, requested)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            cap = min(cap, max(1, int(env)))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return max(1, min(cap, n_jobs))


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *job) for job in jobs]
        return [f.result() for f in futures]


def _level_names(K: int) -> list[str]:
    return [str(i) for i in range(1, K + 1)]


def _strided(T: int, stride: int) -> np.ndarray:
    idx = np.arange(0, T, stride)
    if idx[-1] != T - 1:
        idx = np.append(idx, T - 1)
    return idx


def write_records(path: Path, traj: Trajectory, dates=None, yhat=None) -> None:
    K = traj.K
    header = ["t"]
    if dates is not None:
        header += ["date", "yhat"]
    header += ["score"] + [f"q_{i}" for i in range(1, K + 1)] + [f"err_{i}" for i in range(1, K + 1)]
    if traj.q_star is not None:
        header += [f"qstar_{i}" for i in range(1, K + 1)]

    def rows():
        for k in range(traj.T):
            row = [int(traj.steps[k])]
            if dates is not None:
                row += [f"{dates[k]}-01", float(yhat[k])]
            row += [float(traj.scores[k]), *traj.q[k].tolist(), *traj.err[k].astype(np.int64).tolist()]
            if traj.q_star is not None:
                row += traj.q_star[k].tolist()
            yield row

    write_rows(path, header, rows())


def write_metrics(out: Path, traj: Trajectory, grid: CoverageGrid, m: RunMetrics, stride: int) -> None:
    levels = _level_names(grid.K)
    idx = _strided(traj.T, stride)
    steps = traj.steps
    write_rows(out / "ce.csv", ["level", "value"], zip(levels, m.ce.tolist()))
    write_rows(out / "ce_sum_cumulative.csv", ["t", "level", "value"],
               ([int(steps[k]), "all", float(m.ce_sum_cumulative[k])] for k in idx))
    write_rows(out / "set_size_rolling.csv", ["t", "level", "value"],
               ([int(steps[k]), levels[i], float(m.set_size_rolling[k, i])] for k in idx for i in range(grid.K)))
    if m.l1_rolling is not None:
        write_rows(out / "l1_rolling.csv", ["t", "level", "value"],
                   ([int(steps[k]), "all", float(m.l1_rolling[k])] for k in idx))
    if m.min_gap is not None:
        write_rows(out / "min_gap.csv", ["t", "level", "value"],
                   ([int(steps[k]), "all", float(m.min_gap[k])] for k in idx))


def _summary_row(experiment: str, cfg: EstimatorConfig, seed, traj: Trajectory, m: RunMetrics,
                 n_clamped: int, regret=None) -> dict:
    row = {key: "" for key in SUMMARY_COLUMNS}
    row.update(experiment=experiment, method=cfg.label, seed="" if seed is None else seed,
               T=traj.T, K=traj.K, eta=cfg.eta, mu="" if cfg.mu is None else cfg.mu,
               n_clamped=n_clamped)
    row.update(m.summary())
    if regret is not None and cfg.method in ("eg", "pg"):
        row.update(loss_regret=regret.loss_regret, regret_bound=regret.regret_bound,
                   regret_pass=int(regret.regret_pass), quantile_error=regret.quantile_error,
                   quantile_bound=regret.quantile_bound, quantile_pass=int(regret.quantile_pass))
    return row


def write_summary(path: Path, rows: list[dict]) -> None:
    write_rows(path, SUMMARY_COLUMNS, ([r[c] for c in SUMMARY_COLUMNS] for r in rows))


# -- synthetic ---------------------------------------------------------------


@dataclass(frozen=True)
class RunResult:
    name: str
    summary: dict


def synthetic_job(config: ExperimentConfig, method_index: int, seed: int) -> RunResult:
    """One (method, seed) synthetic run, writing its records and metrics."""
    cfg = config.methods[method_index]
    walk = config.walk_for(seed)
    stream = generate_walk(walk)
    q_star = true_quantiles(stream.z, walk, config.grid)
    traj, n_clamped = run_estimator(cfg, stream.scores, q_star)
    name = f"{cfg.label}_seed{seed}"
    m = compute_run_metrics(traj, config.grid, config.dt)
    regret = None
    if cfg.method in ("eg", "pg"):
        regret = regret_and_bounds(traj, cfg, density_floor=1.0 / walk.width,
                                   support_halfwidth=walk.width / 2)
        write_rows(config.out_dir / "metrics" / name / "regret.csv", ["metric", "value"],
                   ([k, v if not isinstance(v, bool) else int(v)] for k, v in regret.as_dict().items()))
    if config.write_records:
        write_records(config.out_dir / "records" / f"{name}.csv", traj)
    write_metrics(config.out_dir / "metrics" / name, traj, config.grid, m, config.metrics_stride)
    return RunResult(name, _summary_row("synthetic", cfg, seed, traj, m, n_clamped, regret))


def run_synthetic(config: ExperimentConfig) -> list[dict]:
    jobs = [(config, k, seed) for seed in config.seeds for k in range(len(config.methods))]
    results = _map(synthetic_job, jobs, worker_count(len(jobs), config.workers))
    rows = [r.summary for r in results]
    write_summary(config.out_dir / "summary.csv", rows)
    return rows


# -- inflation ---------------------------------------------------------------


def inflation_forecasts(config: ExperimentConfig) -> ForecastTable:
    path = config.data_path or bundled_cpi_path()
    series = load_fred_csv(path, config.value_column)
    rates = yearly_inflation(series).between(config.start, config.end)
    if len(rates) == 0:
        raise DataIntegrityError(f"{path}: no observations between {config.start} and {config.end}")
    return rolling_forecasts(rates, config.window, config.window_mode)


def inflation_job(config: ExperimentConfig, method_index: int, forecasts: ForecastTable):
    cfg = config.methods[method_index]
    run = run_inflation_experiment(None, cfg, forecasts=forecasts)
    traj = run.trajectory
    m = compute_run_metrics(traj, config.grid, config.dt)
    if config.write_records:
        write_records(config.out_dir / "records" / f"{cfg.label}.csv", traj, forecasts.dates, forecasts.yhat)
    write_metrics(config.out_dir / "metrics" / cfg.label, traj, config.grid, m, config.metrics_stride)
    return run, _summary_row("inflation", cfg, None, traj, m, run.n_clamped)


def run_inflation(config: ExperimentConfig) -> list[dict]:
    forecasts = inflation_forecasts(config)
    jobs = [(config, k, forecasts) for k in range(len(config.methods))]
    results = _map(inflation_job, jobs, worker_count(len(jobs), config.workers))
    runs = [r for r, _ in results]
    rows = [row for _, row in results]
    band_header = ["date", "method", "alpha", "yhat", "lo", "hi", "err"]
    write_rows(config.out_dir / "bands.csv", band_header, (row for run in runs for row in band_rows(run)))
    write_summary(config.out_dir / "summary.csv", rows)
    return rows


def run(config: ExperimentConfig) -> list[dict]:
    if config.experiment == "synthetic":
        return run_synthetic(config)
    return run_inflation(config)


# -- metrics over existing records --------------------------------------------


def read_records(path) -> Trajectory:
    """Load a records CSV written by :func:`write_records`."""
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")
    if data.size == 0:
        raise DataIntegrityError(f"{path}: no records")
    data = np.atleast_1d(data)
    names = data.dtype.names
    if "score" not in names:
        raise DataIntegrityError(f"{path}: missing 'score' column")

    def block(prefix):
        cols = sorted((n for n in names if n.startswith(prefix) and n[len(prefix):].isdigit()),
                      key=lambda n: int(n[len(prefix):]))
        if not cols:
            return None
        return np.column_stack([np.asarray(data[c], dtype=np.float64) for c in cols])

    q, err, q_star = block("q_"), block("err_"), block("qstar_")
    if q is None or err is None:
        raise DataIntegrityError(f"{path}: missing threshold or miscoverage columns")
    t = np.asarray(data["t"], dtype=np.int64)
    return Trajectory(np.asarray(data["score"], dtype=np.float64), q, err, q_star, t0=int(t[0]))


def recompute_metrics(paths, grid: CoverageGrid, dt: int, out_dir: Path, stride: int = 1) -> list[dict]:
    rows = []
    for path in paths:
        path = Path(path)
        traj = read_records(path)
        if traj.K != grid.K:
            raise DataIntegrityError(f"{path}: has {traj.K} levels, config grid has {grid.K}")
        m = compute_run_metrics(traj, grid, dt)
        write_metrics(out_dir / "metrics" / path.stem, traj, grid, m, stride)
        rows.append({"run": path.stem, "T": traj.T, **m.summary()})
    cols = ["run", "T", "ce_max", "ce_sum", "l1_final", "violations", "min_gap", "mean_width"]
    write_rows(out_dir / "metrics_summary.csv", cols, ([r.get(c, "") for c in cols] for r in rows))
    return rows
