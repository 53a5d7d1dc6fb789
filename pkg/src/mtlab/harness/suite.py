"""Named experiment suites and the suite runner."""
from __future__ import annotations

import time

from ..geometry import ConfigurationError
from .config import ExperimentConfig
from .experiments import Check, Report, environment_stamp, run_experiment
from .output import dump_json

_TORUS_MC = {"sim.kappa": 0.01, "sim.hmax": 0.05, "check.abs_tol": 0.05, "sim.bins": 32}

# (criterion, config values, per-check criterion overrides)
_FAST = [
    (1, {"experiment.id": "oracle", "space.key": "torus1", "field.name": "cos"}, {}),
    (1, {"experiment.id": "oracle", "space.key": "torus2", "field.name": "cos"}, {}),
    (1, {"experiment.id": "oracle", "space.key": "gauss1", "field.name": "h2"}, {}),
    (2, {"experiment.id": "riesz-mc", "space.key": "torus1", "field.name": "cos+halfsin2",
         "operator.y": 6.0, "sim.paths": 200000, **_TORUS_MC}, {}),
    (3, {"experiment.id": "riesz-mc", "space.key": "torus1", "field.name": "cos",
         "operator.a": 3.0, "sim.paths": 200000, **_TORUS_MC}, {}),
    (4, {"experiment.id": "riesz-mc", "space.key": "gauss1", "field.name": "h2",
         "sim.paths": 40000}, {}),
    (5, {"experiment.id": "riesz-mc", "space.key": "quartic1", "field.name": "quartic-e1",
         "variant.payoff": "both", "sim.paths": 20000}, {}),
    (5, {"experiment.id": "riesz-mc", "space.key": "quartic1", "field.name": "quartic-e1",
         "operator.a": 1.0, "variant.payoff": "both", "sim.paths": 20000}, {}),
    (6, {"experiment.id": "riesz-mc", "space.key": "sphere2", "field.name": "Y10",
         "sim.paths": 40000}, {}),
    (7, {"experiment.id": "riesz-reversed", "space.key": "torus1", "field.name": "cos",
         "sim.paths": 50000, "reversal.drift_paths": 100000, **_TORUS_MC}, {}),
    (8, {"experiment.id": "lp-check", "space.key": "torus1", "sim.paths": 100000,
         "ito.paths": 20000, "ito.field": "cos+halfsin2"},
     {"ito_mean_residual": 9, "ito_rms_ratio": 9}),
    (10, {"experiment.id": "ba-oracle", "space.key": "torus2", "field.name": "cosx-dx",
          "operator.a_values": (0.0, 0.5, 2.0)}, {}),
    (10, {"experiment.id": "ba-mc", "space.key": "torus2", "field.name": "cosx-dx",
          "sim.paths": 20000, "sim.dt": 2e-3}, {"heat_identity_residual": 9}),
    (10, {"experiment.id": "ba-mc", "space.key": "torus2", "field.name": "cosy-dx",
          "sim.paths": 20000, "sim.dt": 2e-3}, {"heat_identity_residual": 9}),
    (11, {"experiment.id": "norms", "space.key": "torus1", "operator.p": (1.5, 3.0, 2.0),
          "norms.cutoff": 2048, "norms.restarts": 4, "check.norm_floor": 1.5}, {}),
    (11, {"experiment.id": "norms", "space.key": "gauss1", "operator.p": (1.5, 3.0, 2.0),
          "norms.cutoff": 16}, {}),
    (12, {"experiment.id": "norms", "space.key": "torus1", "norms.search": False,
          "norms.jy_fields": ("cos", "cos+halfsin2"), "norms.jy_p": (2.0, 1.5, 4.0),
          "sim.paths": 20000, "sim.hmax": 0.05, "norms.exit_paths": 100000}, {}),
]

# shrunken copies for plumbing tests; their statistical checks are not meaningful
_SMOKE_SIZES = {"sim.paths": 200, "oracle.random": 3, "reversal.drift_paths": 0,
                "reversal.identity_paths": 2, "norms.exit_paths": 0, "norms.cutoff": 8,
                "norms.restarts": 2, "norms.iterations": 20, "sim.kappa": 0.01, "sim.hmax": 0.05}


def _entry_name(i, criterion, values):
    return f"c{criterion:02d}-{i:02d}-{values['experiment.id']}-{values['space.key']}"


def build_suite(name: str, **overrides) -> list:
    """Suite entries ``(criterion, config, check-criterion overrides)``."""
    if name not in SUITES:
        raise ConfigurationError(f"unknown suite {name!r}; known: {', '.join(SUITES)}")
    out = []
    for i, (crit, values, per_check) in enumerate(_FAST):
        vals = dict(values)
        if name == "smoke":
            vals.update(_SMOKE_SIZES)
            if vals.get("ito.paths"):
                vals["ito.paths"] = 200
        vals["experiment.name"] = _entry_name(i, crit, values)
        vals.update({k.replace("__", "."): v for k, v in overrides.items()})
        out.append((crit, ExperimentConfig(vals), per_check))
    return out


SUITES = ("fast", "smoke")


def verify_all(suite, **overrides) -> Report:
    """Run every entry of a suite and merge the checks into one report.

    ``suite`` is a suite name or a list of ExperimentConfig (or
    ``(criterion, config, overrides)`` entries). Check names are prefixed with
    the entry name, so each appears exactly once.
    """
    entries = build_suite(suite, **overrides) if isinstance(suite, str) else [
        e if isinstance(e, tuple) else (None, e, {}) for e in suite]
    if not entries:
        raise ConfigurationError("empty suite")
    names = [cfg.name for _, cfg, _ in entries]
    if len(set(names)) != len(names):
        raise ConfigurationError("suite entries need distinct experiment names")
    checks, configs, files, data = [], {}, [], {}
    t0 = time.perf_counter()
    for crit, cfg, per_check in entries:
        rep = run_experiment(cfg)
        configs[cfg.name] = rep.config
        files += [f"{cfg.name}/{f}" for f in rep.files]
        data[cfg.name] = dict(passed=rep.passed)
        for c in rep.checks:
            checks.append(Check(f"{cfg.name}/{c.name}", c.passed, c.value, c.oracle, c.tolerance,
                                c.detail, per_check.get(c.name, crit)))
    elapsed = time.perf_counter() - t0
    first = entries[0][1]
    label = suite if isinstance(suite, str) else "custom"
    report = Report(f"suite:{label}", configs, checks, environment_stamp(first),
                    files + ["summary.json", "timing.json"], data)
    root = first.output_root
    root.mkdir(parents=True, exist_ok=True)
    dump_json(root / "summary.json", report.to_dict())
    dump_json(root / "timing.json", dict(seconds=elapsed))
    return report
