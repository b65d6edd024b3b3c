"""Experiment configuration: YAML parsing, overrides, validation, construction.

A config is a single YAML mapping. Unknown keys are reported as violations so
that typos do not silently fall back to defaults. See the README for the full
key reference.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .core import CoverageGrid
from .errors import ConfigError, ConfigParseError, InvalidInputError
from .estimators import METHOD_ALIASES, EstimatorConfig, canonical_method
from .forecast import DEFAULT_SCORE_BOUND, DEFAULT_WINDOW, WINDOW_MODES
from .synthetic import WalkConfig

EXPERIMENTS = ("synthetic", "inflation")

SYNTHETIC_DEFAULTS: dict[str, Any] = {
    "experiment": "synthetic",
    "out_dir": "runs/synthetic",
    "seeds": [0],
    "dt": 10_000,
    "score_bound": 10.0,
    "levels": "0.1:0.9:0.1",
    "walk": {"a": 0.5, "b": 9.5, "z1": 5.0, "sigma": 0.025, "width": 1.0, "T": 50_000},
    "methods": ["independent", "projected_tracker", "pg", "eg"],
    "metrics_stride": 1,
    "write_records": True,
}

INFLATION_DEFAULTS: dict[str, Any] = {
    "experiment": "inflation",
    "out_dir": "runs/inflation",
    "data_path": None,
    "value_column": None,
    "start": "1950-01",
    "end": None,
    "window": DEFAULT_WINDOW,
    "window_mode": "targets",
    "dt": 60,
    "score_bound": DEFAULT_SCORE_BOUND,
    "levels": "0.01:0.99:0.01",
    "methods": ["independent", "projected_tracker", "pg", "eg"],
    "metrics_stride": 1,
    "write_records": True,
}

_COMMON_KEYS = {"experiment", "out_dir", "dt", "score_bound", "levels", "methods",
                "metrics_stride", "write_records", "workers"}
_KEYS = {
    "synthetic": _COMMON_KEYS | {"seeds", "walk"},
    "inflation": _COMMON_KEYS | {"data_path", "value_column", "start", "end", "window", "window_mode"},
}
_METHOD_KEYS = {"method", "name", "eta", "mu", "init", "min_gap", "err_from_shadow"}
_WALK_KEYS = {"a", "b", "z1", "sigma", "width", "T"}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    experiment: str
    grid: CoverageGrid
    methods: tuple[EstimatorConfig, ...]
    out_dir: Path
    dt: int
    seeds: tuple[int, ...] = ()
    walk: WalkConfig | None = None
    data_path: Path | None = None
    value_column: str | None = None
    start: str | None = None
    end: str | None = None
    window: int = DEFAULT_WINDOW
    window_mode: str = "targets"
    metrics_stride: int = 1
    write_records: bool = True
    workers: int | None = None

    def walk_for(self, seed: int) -> WalkConfig:
        return WalkConfig(**{**self.walk.__dict__, "seed": seed})


def parse_yaml(text: str, source: str = "<config>") -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ConfigParseError(f"{source}: {exc.problem or exc}", line, col) from None
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"{source}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigParseError(f"{source}: top level must be a mapping")
    return data


def load_raw(path) -> dict:
    path = Path(path)
    return parse_yaml(path.read_text(), str(path))


def with_defaults(raw: dict, experiment: str | None = None) -> dict:
    """Fill missing keys from the defaults for the experiment type."""
    kind = raw.get("experiment", experiment or "synthetic")
    base = copy.deepcopy(INFLATION_DEFAULTS if kind == "inflation" else SYNTHETIC_DEFAULTS)
    merged = {**base, **copy.deepcopy(raw)}
    if kind == "synthetic" and isinstance(raw.get("walk"), dict):
        merged["walk"] = {**base["walk"], **raw["walk"]}
    merged["experiment"] = kind
    return merged


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _grid_from(raw: dict) -> CoverageGrid:
    levels = raw["levels"]
    if isinstance(levels, str):
        return CoverageGrid.from_range(levels, raw["score_bound"])
    return CoverageGrid(levels, raw["score_bound"])


def _method_entries(raw_methods) -> list[dict]:
    entries = []
    for m in raw_methods:
        entries.append({"method": m} if isinstance(m, str) else dict(m))
    return entries


def validate(raw: dict) -> list[str]:
    """Every violated invariant of a (defaults-filled) config, as ``path: message``."""
    out: list[str] = []
    kind = raw.get("experiment")
    if kind not in EXPERIMENTS:
        return [f"experiment: must be one of {EXPERIMENTS}, got {kind!r}"]
    for key in sorted(set(raw) - _KEYS[kind]):
        out.append(f"{key}: unknown key for a {kind} experiment")

    grid = None
    if not (_is_number(raw.get("score_bound")) and raw["score_bound"] > 0):
        out.append("score_bound: must be a positive number")
    else:
        levels = raw.get("levels")
        if isinstance(levels, list) and not all(_is_number(a) for a in levels):
            out.append("levels: every level must be a number")
        elif isinstance(levels, list) and any(b <= a for a, b in zip(levels, levels[1:])):
            out.append("levels: alphas must be strictly increasing")
        elif not isinstance(levels, (str, list)):
            out.append("levels: must be 'start:stop:step' or a list of alphas")
        else:
            try:
                grid = _grid_from(raw)
            except InvalidInputError as exc:
                out.append(f"levels: {exc}")

    if not (_is_int(raw.get("dt")) and raw["dt"] >= 1):
        out.append("dt: must be an integer >= 1")
    if not (_is_int(raw.get("metrics_stride")) and raw["metrics_stride"] >= 1):
        out.append("metrics_stride: must be an integer >= 1")
    if not isinstance(raw.get("write_records"), bool):
        out.append("write_records: must be true or false")
    if not isinstance(raw.get("out_dir"), str) or not raw["out_dir"]:
        out.append("out_dir: must be a non-empty path")
    if "workers" in raw and not (_is_int(raw["workers"]) and raw["workers"] >= 1):
        out.append("workers: must be an integer >= 1")

    methods = raw.get("methods")
    if not isinstance(methods, list) or not methods:
        out.append("methods: at least one method is required")
    else:
        labels = []
        for k, entry in enumerate(_method_entries(methods)):
            where = f"methods[{k}]"
            for key in sorted(set(entry) - _METHOD_KEYS):
                out.append(f"{where}.{key}: unknown key")
            name = entry.get("method")
            if not isinstance(name, str) or name.strip().lower() not in METHOD_ALIASES:
                out.append(f"{where}.method: unknown method {name!r}")
                continue
            labels.append(entry.get("name") or canonical_method(name))
            if grid is None:
                continue
            bad = [k for k in ("eta", "mu", "min_gap") if entry.get(k) is not None and not _is_number(entry[k])]
            out.extend(f"{where}.{key}: must be a number" for key in bad)
            if bad:
                continue
            try:
                EstimatorConfig(**_estimator_kwargs(entry, grid))
            except ConfigError as exc:
                out.extend(f"{where}: {v}" for v in exc.violations or [str(exc)])
            except (TypeError, ValueError) as exc:
                out.append(f"{where}: {exc}")
        dupes = sorted({x for x in labels if labels.count(x) > 1})
        if dupes:
            out.append(f"methods: duplicate method labels {dupes}; set distinct 'name' keys")

    if kind == "synthetic":
        seeds = raw.get("seeds")
        if not isinstance(seeds, list) or not seeds:
            out.append("seeds: at least one seed is required")
        elif not all(_is_int(s) and s >= 0 for s in seeds):
            out.append("seeds: seeds must be non-negative integers")
        elif len(set(seeds)) != len(seeds):
            out.append("seeds: seeds must be distinct")
        walk = raw.get("walk")
        if not isinstance(walk, dict):
            out.append("walk: must be a mapping")
        else:
            for key in sorted(set(walk) - _WALK_KEYS):
                out.append(f"walk.{key}: unknown key")
            bad = [k for k in _WALK_KEYS & set(walk) if not _is_number(walk[k])]
            for key in sorted(bad):
                out.append(f"walk.{key}: must be a number")
            if not bad and _is_number(raw.get("score_bound")):
                try:
                    WalkConfig(**{k: walk[k] for k in _WALK_KEYS & set(walk)},
                               score_bound=raw["score_bound"])
                except InvalidInputError as exc:
                    out.append(f"walk: {exc}")
    else:
        if raw.get("data_path") is not None and not isinstance(raw["data_path"], str):
            out.append("data_path: must be a path string or null for the bundled sample")
        if not (_is_int(raw.get("window")) and raw["window"] >= 4):
            out.append("window: must be an integer >= 4")
        if raw.get("window_mode") not in WINDOW_MODES:
            out.append(f"window_mode: must be one of {WINDOW_MODES}")
        for key in ("start", "end"):
            val = raw.get(key)
            if val is not None and not isinstance(val, str):
                out.append(f"{key}: must be a 'YYYY-MM' string")
    return out


def _estimator_kwargs(entry: dict, grid: CoverageGrid) -> dict:
    kwargs = {"method": entry["method"], "grid": grid}
    for key in ("eta", "mu", "min_gap", "err_from_shadow", "name"):
        if entry.get(key) is not None:
            kwargs[key] = entry[key]
    if entry.get("init") is not None:
        kwargs["init"] = entry["init"]
    return kwargs


def build(raw: dict) -> ExperimentConfig:
    """Validate a defaults-filled raw config and construct the typed form."""
    problems = validate(raw)
    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems), problems)
    grid = _grid_from(raw)
    methods = tuple(EstimatorConfig(**_estimator_kwargs(e, grid)) for e in _method_entries(raw["methods"]))
    common = dict(
        experiment=raw["experiment"],
        grid=grid,
        methods=methods,
        out_dir=Path(raw["out_dir"]),
        dt=raw["dt"],
        metrics_stride=raw["metrics_stride"],
        write_records=raw["write_records"],
        workers=raw.get("workers"),
    )
    if raw["experiment"] == "synthetic":
        walk = WalkConfig(**raw["walk"], score_bound=raw["score_bound"])
        return ExperimentConfig(seeds=tuple(raw["seeds"]), walk=walk, **common)
    return ExperimentConfig(
        data_path=Path(raw["data_path"]) if raw.get("data_path") else None,
        value_column=raw.get("value_column"),
        start=raw.get("start"),
        end=raw.get("end"),
        window=raw["window"],
        window_mode=raw["window_mode"],
        **common,
    )


def apply_overrides(
    raw: dict,
    *,
    seed: int | None = None,
    out: str | None = None,
    methods: str | None = None,
    eta: str | None = None,
    mu: float | None = None,
    levels: str | None = None,
    data: str | None = None,
    T: int | None = None,
) -> dict:
    """Return a copy of ``raw`` with command-line values taking precedence.

    ``eta`` is either one number for every method or ``method=value`` pairs
    separated by commas.
    """
    raw = copy.deepcopy(raw)
    if seed is not None:
        raw["seeds"] = [seed]
    if out is not None:
        raw["out_dir"] = out
    if levels is not None:
        raw["levels"] = levels
    if data is not None:
        raw["data_path"] = data
    if T is not None:
        raw.setdefault("walk", {})["T"] = T
    if methods is not None:
        existing = {canonical_method(e["method"]): e for e in _method_entries(raw.get("methods", []))
                    if isinstance(e.get("method"), str) and e["method"].strip().lower() in METHOD_ALIASES}
        picked = []
        for name in (m for m in methods.split(",") if m.strip()):
            try:
                key = canonical_method(name)
            except ConfigError:
                picked.append({"method": name.strip()})
                continue
            picked.append(dict(existing.get(key, {"method": key})))
        raw["methods"] = picked
    if eta is not None or mu is not None:
        per_method = _parse_eta(eta) if eta is not None else {}
        entries = _method_entries(raw.get("methods", []))
        for entry in entries:
            if mu is not None and isinstance(entry.get("method"), str) and entry["method"].strip().lower() == "eg":
                entry["mu"] = mu
            if eta is None:
                continue
            try:
                key = canonical_method(entry["method"])
            except (ConfigError, AttributeError):
                continue
            if "*" in per_method:
                entry["eta"] = per_method["*"]
            if key in per_method:
                entry["eta"] = per_method[key]
        raw["methods"] = entries
    return raw


def _parse_eta(text: str) -> dict[str, float]:
    text = text.strip()
    try:
        return {"*": float(text)}
    except ValueError:
        pass
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise ConfigError(f"--eta: expected a number or method=value pairs, got {text!r}")
        name, value = part.split("=", 1)
        try:
            out[canonical_method(name)] = float(value)
        except ValueError:
            raise ConfigError(f"--eta: bad value {value!r} for {name!r}")
    return out


def load(path=None, experiment: str | None = None, **overrides) -> ExperimentConfig:
    raw = load_raw(path) if path is not None else {}
    if experiment is not None and raw.get("experiment", experiment) != experiment:
        raise ConfigError(f"config describes a {raw['experiment']!r} experiment, not {experiment!r}")
    raw = with_defaults(raw, experiment)
    return build(apply_overrides(raw, **overrides))


def validate_file(path) -> list[str]:
    """Parse ``path`` and list its violations; raises :class:`ConfigParseError` if unparseable."""
    raw = load_raw(path)
    return validate(with_defaults(raw))
