"""Command-line entry point: ``mtlab <subcommand> [flags]``.

Exit codes: 0 when every check passes, 1 on a check failure, 2 on a
configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from ..geometry import ConfigurationError
from .config import OUTPUT_ENV, PAYOFF_VARIANTS, ExperimentConfig, load_values
from .experiments import run_experiment
from .output import plot_estimate_csv, read_csv, validate_summary
from .suite import SUITES, verify_all

SUBCOMMANDS = ("oracle", "ba-oracle", "paths", "riesz-mc", "riesz-reversed", "ba-mc", "lp-check",
               "norms", "verify", "report")

# subcommand -> config values applied before the config file and flags
SUBCOMMAND_DEFAULTS = {
    "ba-oracle": {"space.key": "torus2", "field.name": "cosx-dx"},
    "ba-mc": {"space.key": "torus2", "field.name": "cosx-dx", "sim.dt": 2e-3},
    "lp-check": {"ito.paths": 20000},
    "paths": {"operator.y": 1.0},
}

# flag dest -> config key
FLAG_KEYS = {
    "space": "space.key", "a": "operator.a", "y": "operator.y", "t_horizon": "operator.T",
    "p": "operator.p", "paths": "sim.paths", "dt": "sim.dt", "bins": "sim.bins",
    "seed": "sim.seed", "out": "output.dir", "variant": "variant.payoff",
    "field": "field.name", "workers": "sim.workers",
}


def _shared(parser):
    parser.add_argument("--config", metavar="FILE", help="flat key = value config file")
    parser.add_argument("--space", help="space key (torus1, torus2, gauss1, gauss2, quartic1, sphere2)")
    parser.add_argument("--field", help="named test field")
    parser.add_argument("--a", type=float, help="spectral shift a >= 0")
    parser.add_argument("--y", type=float, help="starting height")
    parser.add_argument("--t-horizon", type=float, help="heat horizon T")
    parser.add_argument("--p", help="comma-separated exponents")
    parser.add_argument("--paths", type=int, help="number of paths N")
    parser.add_argument("--dt", type=float, help="base time step")
    parser.add_argument("--bins", type=int, help="bins per axis (0 = default grid)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int, help="worker processes (default $MTLAB_WORKERS or 1)")
    parser.add_argument("--out", help=f"output root (default ${OUTPUT_ENV} or ./mtlab-out)")
    parser.add_argument("--variant", choices=PAYOFF_VARIANTS)
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="any config key; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        _shared(p)
        if name == "verify":
            p.add_argument("--suite", default="fast", choices=SUITES)
        if name == "report":
            p.add_argument("--dir", help="directory to scan (default: the output root)")
    return parser


def config_from_args(args) -> ExperimentConfig:
    values = {"experiment.id": args.command}
    values.update(SUBCOMMAND_DEFAULTS.get(args.command, {}))
    if args.config:
        values.update(load_values(args.config))
    for dest, key in FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[key] = v
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    return ExperimentConfig(values)


def _print_report(report, stream=None):
    stream = stream or sys.stdout
    for c in report.checks:
        mark = "PASS" if c.passed else "FAIL"
        val = "" if c.value is None else f" value={c.value:.6g}"
        print(f"[{mark}] {c.name}{val} {c.detail}".rstrip(), file=stream)
    print(f"overall: {'PASS' if report.passed else 'FAIL'}", file=stream)
    if not report.passed:
        print("failed: " + ", ".join(report.failures), file=stream)


def _report(args) -> int:
    root = Path(args.dir or args.out or os.environ.get(OUTPUT_ENV) or "mtlab-out")
    if not root.is_dir():
        raise ConfigurationError(f"no output directory {root}")
    ok = True
    for csv_path in sorted(root.rglob("*.csv")):
        header, _ = read_csv(csv_path)
        if "estimate_0" in header:
            plot_estimate_csv(csv_path, title=f"{csv_path.parent.name}/{csv_path.stem}")
    for summary in sorted(root.rglob("summary.json")):
        data = json.loads(summary.read_text())
        problems = validate_summary(data)
        status = "PASS" if data.get("passed") else "FAIL"
        if problems:
            status, ok = "INVALID", False
        ok = ok and bool(data.get("passed"))
        n = len(data.get("checks", []))
        print(f"{status:7s} {summary.parent.relative_to(root) if summary.parent != root else '.'}"
              f" ({n} checks)")
        for p in problems:
            print(f"        {p}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return _report(args)
        if args.command == "verify":
            overrides = {}
            if args.workers:
                overrides["sim.workers"] = args.workers
            if args.out:
                overrides["output.dir"] = args.out
            report = verify_all(args.suite, **overrides)
        else:
            report = run_experiment(config_from_args(args))
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    _print_report(report)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
