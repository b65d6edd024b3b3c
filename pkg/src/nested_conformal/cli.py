"""Command-line entry point: ``nested-conformal <simulate|inflation|validate|metrics>``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as config_mod
from .errors import ConfigError, ConfigParseError, DataIntegrityError, NestedConformalError
from .runner import recompute_metrics, run

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4

logger = logging.getLogger("nested_conformal")


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML experiment config (defaults are used if omitted)")
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--methods", help="comma-separated methods, e.g. eg,pg,tracker,tracker-proj")
    p.add_argument("--eta", help="step size for every method, or pairs like eg=0.001,pg=0.05")
    p.add_argument("--mu", type=float, help="eg minimum gap mass")
    p.add_argument("--levels", help='miscoverage grid "start:stop:step"')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nested-conformal", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the synthetic reflected-walk experiment")
    _add_overrides(sim)
    sim.add_argument("--seed", type=int, help="run this single seed")
    sim.add_argument("--T", type=int, dest="T", help="stream length")

    inf = sub.add_parser("inflation", help="run the CPI inflation experiment")
    _add_overrides(inf)
    inf.add_argument("--data", help="FRED-format CPI CSV (bundled sample if omitted)")

    val = sub.add_parser("validate", help="check a config and list every violation")
    val.add_argument("--config", type=Path, required=True)

    met = sub.add_parser("metrics", help="recompute metrics from existing record files")
    met.add_argument("--config", type=Path, help="config supplying levels, score_bound and dt")
    met.add_argument("--experiment", choices=config_mod.EXPERIMENTS, default=None)
    met.add_argument("--levels", help='miscoverage grid "start:stop:step"')
    met.add_argument("--out", help="output directory (overrides out_dir)")
    met.add_argument("records", nargs="+", type=Path, help="records CSV files")
    return parser


def _overrides(args, **extra) -> dict:
    keys = ("out", "methods", "eta", "mu", "levels")
    return {k: getattr(args, k) for k in keys} | extra


def _cmd_validate(args) -> int:
    problems = config_mod.validate_file(args.config)
    for p in problems:
        print(p)
    if problems:
        return EXIT_CONFIG
    print(f"{args.config}: ok")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = config_mod.load(args.config, "synthetic", **_overrides(args, seed=args.seed, T=args.T))
    rows = run(cfg)
    print(f"wrote {len(rows)} runs to {cfg.out_dir}")
    return EXIT_OK


def _cmd_inflation(args) -> int:
    cfg = config_mod.load(args.config, "inflation", **_overrides(args, data=args.data))
    rows = run(cfg)
    print(f"wrote {len(rows)} runs to {cfg.out_dir}")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    raw = config_mod.load_raw(args.config) if args.config else {}
    raw = config_mod.with_defaults(raw, args.experiment)
    raw = config_mod.apply_overrides(raw, out=args.out, levels=args.levels)
    cfg = config_mod.build(raw)
    rows = recompute_metrics(args.records, cfg.grid, cfg.dt, cfg.out_dir, cfg.metrics_stride)
    print(f"wrote metrics for {len(rows)} record files to {cfg.out_dir}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "inflation": _cmd_inflation,
    "validate": _cmd_validate,
    "metrics": _cmd_metrics,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigParseError as exc:
        print(f"config parse error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataIntegrityError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NestedConformalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
