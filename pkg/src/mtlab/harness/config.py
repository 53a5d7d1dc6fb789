"""Flat ``dotted.key = value`` experiment configuration.

One key per line, ``#`` starts a comment. Every key has a type and a default;
unknown keys are rejected so a typo never silently falls back to a default.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..geometry import SPACE_KEYS, ConfigurationError
from ..representation import BA_COMPENSATORS, BA_READINGS, COMPENSATORS, EXTENSIONS
from ..forms import PAIRINGS
from .fields import FIELDS

EXPERIMENTS = ("oracle", "ba-oracle", "paths", "riesz-mc", "riesz-reversed", "ba-mc", "lp-check",
               "norms")
PAYOFF_VARIANTS = ("corrected", "uncorrected", "both")
OUTPUT_ENV = "MTLAB_OUTPUT"


def _floats(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _strs(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(str(v) for v in text)
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


# key -> (parser, default, allowed values or None)
SCHEMA = {
    "experiment.id": (str, "riesz-mc", EXPERIMENTS),
    "experiment.name": (str, "", None),
    "space.key": (str, "torus1", SPACE_KEYS),
    "space.covariance": (str, "", None),
    "field.name": (str, "cos", tuple(FIELDS)),
    "operator.a": (float, 0.0, None),
    "operator.y": (float, 6.0, None),
    "operator.T": (float, 4.0, None),
    "operator.p": (_floats, (2.0,), None),
    "operator.a_values": (_floats, (0.0, 1.0, 3.0), None),
    "sim.paths": (int, 10000, None),
    "sim.dt": (float, 1e-3, None),
    "sim.bins": (int, 0, None),
    "sim.seed": (int, 7, None),
    "sim.max_steps": (int, 10**7, None),
    "sim.workers": (int, 0, None),
    "sim.kappa": (float, 0.0025, None),
    "sim.hmax": (float, 0.01, None),
    "sim.tail_eps": (float, 1e-3, None),
    "variant.payoff": (str, "corrected", PAYOFF_VARIANTS),
    "variant.extension": (str, "extended", EXTENSIONS),
    "variant.compensator": (str, "sym", tuple(COMPENSATORS)),
    "variant.ba_compensator": (str, "dX2", tuple(BA_COMPENSATORS)),
    "variant.ba_reading": (str, "heat_killed", BA_READINGS),
    "variant.pairing": (str, "increment-first", PAIRINGS),
    "oracle.random": (int, 100, None),
    "lp.heights": (_floats, (2.0, 0.5), None),
    "lp.interval": (_floats, (0.0, 1.0), None),
    "lp.dt": (float, 1e-4, None),
    "ito.field": (str, "cos+halfsin2", tuple(FIELDS)),
    "ito.paths": (int, 0, None),
    "ito.y": (float, 2.0, None),
    "ito.dt": (float, 1e-3, None),
    "reversal.identity_paths": (int, 20, None),
    "reversal.drift_paths": (int, 0, None),
    "reversal.drift_window": (_floats, (0.1, 0.5), None),
    "norms.operator": (str, "riesz", ("riesz", "S_B")),
    "norms.search": (_bool, True, None),
    "norms.cutoff": (int, 16, None),
    "norms.restarts": (int, 16, None),
    "norms.iterations": (int, 200, None),
    "norms.jy_fields": (_strs, (), None),
    "norms.jy_p": (_floats, (2.0, 1.5, 4.0), None),
    "norms.exit_paths": (int, 0, None),
    "check.oracle_sign": (float, 1.0, None),
    "check.abs_tol": (float, 0.0, None),
    "check.z": (float, 3.0, None),
    "check.norm_floor": (float, 0.0, None),
    "check.norm_floor_p": (float, 3.0, None),
    "output.dir": (str, "", None),
}

# keys that may differ between runs without changing any emitted number
EXECUTION_KEYS = ("sim.workers", "output.dir")


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_render(v) for v in value)
    return str(value)


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = {k: spec[1] for k, spec in SCHEMA.items()}
        for k, v in self.values.items():
            merged[k] = _coerce(k, v)
        self.values = merged
        self.validate()

    def __getitem__(self, key):
        if key not in SCHEMA:
            raise KeyError(key)
        return self.values[key]

    def replace(self, **updates) -> "ExperimentConfig":
        """Copy with ``section__name`` keyword updates (``sim__paths=100``)."""
        vals = dict(self.values)
        for k, v in updates.items():
            vals[k.replace("__", ".")] = v
        return ExperimentConfig(vals)

    def with_values(self, values: dict) -> "ExperimentConfig":
        vals = dict(self.values)
        vals.update(values)
        return ExperimentConfig(vals)

    @property
    def name(self) -> str:
        return self.values["experiment.name"] or self.values["experiment.id"]

    @property
    def output_root(self) -> Path:
        return Path(self.values["output.dir"] or os.environ.get(OUTPUT_ENV) or "mtlab-out")

    def validate(self):
        v = self.values
        if v["space.key"] != "gauss1" and v["space.key"] != "gauss2" and v["space.covariance"]:
            raise ConfigurationError(f"space {v['space.key']} takes no covariance")
        for key in ("sim.paths", "sim.max_steps", "oracle.random"):
            if v[key] < 1:
                raise ConfigurationError(f"{key} must be positive")
        for key in ("sim.dt", "operator.y", "operator.T", "lp.dt", "ito.dt", "ito.y", "sim.kappa",
                    "sim.hmax", "sim.tail_eps"):
            if not (v[key] > 0 and math.isfinite(v[key])):
                raise ConfigurationError(f"{key} must be positive")
        if v["operator.a"] < 0 or any(a < 0 for a in v["operator.a_values"]):
            raise ConfigurationError("operator.a must be nonnegative")
        for p in v["operator.p"] + v["norms.jy_p"]:
            if not (p > 1 and math.isfinite(p)):
                raise ConfigurationError(f"invalid p = {p!r}; need 1 < p < inf")
        if not v["operator.p"]:
            raise ConfigurationError("operator.p is empty")
        if v["sim.bins"] < 0 or v["sim.workers"] < 0:
            raise ConfigurationError("sim.bins and sim.workers must be nonnegative")
        if v["check.oracle_sign"] not in (1.0, -1.0):
            raise ConfigurationError("check.oracle_sign is +1 or -1")
        for name in v["norms.jy_fields"]:
            if name not in FIELDS:
                raise ConfigurationError(f"unknown field {name!r} in norms.jy_fields")
        if len(v["lp.interval"]) != 2 or len(v["reversal.drift_window"]) != 2:
            raise ConfigurationError("intervals take two values")

    def to_text(self) -> str:
        return "".join(f"{k} = {_render(self.values[k])}\n" for k in sorted(self.values))

    def echo(self) -> dict:
        """Config values that determine the results, JSON-ready."""
        return {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in sorted(self.values.items()) if k not in EXECUTION_KEYS}


def _coerce(key, value):
    if key not in SCHEMA:
        raise ConfigurationError(f"unknown config key {key!r}")
    parse, _, allowed = SCHEMA[key]
    try:
        out = parse(value) if not isinstance(value, str) or parse is not str else value.strip()
        if parse is int and isinstance(value, str):
            out = int(float(value)) if "e" in value.lower() else int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad value {value!r} for {key}") from exc
    if allowed is not None and out not in allowed:
        raise ConfigurationError(f"bad value {out!r} for {key}; expected one of {', '.join(allowed)}")
    return out


def parse_values(text: str) -> dict:
    """Explicitly set keys of a config text, typed."""
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigurationError(f"line {n}: duplicate key {key!r}")
        values[key] = _coerce(key, value)
    return values


def parse_config(text: str) -> ExperimentConfig:
    return ExperimentConfig(parse_values(text))


def load_values(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_values(text)


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig(load_values(path))


def save_config(config: ExperimentConfig, path):
    Path(path).write_text(config.to_text())
