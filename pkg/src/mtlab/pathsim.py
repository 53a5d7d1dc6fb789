"""Record-based path simulation of the background radiation and heat-horizon processes.

These are the reference steppers: fixed step size, every increment stored so a
record can be replayed or re-indexed. The Monte Carlo pipelines use the
compiled kernels instead (see :mod:`mtlab.kernels`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (ConfigurationError, ModelSpace, PointFrame, SimulationFault,
                       curvature_action, parse_space, sample_stationary, step_diffusion)

MODES = ("absorption", "horizon")
DRIVERS = ("dB", "dW")


@dataclass(frozen=True)
class PathConfig:
    space: str
    mode: str = "absorption"
    y: float | None = None
    T: float | None = None
    dt: float = 1e-3
    max_steps: int = 10**7
    seed: int = 0
    path_index: int = 0
    covariance: str | None = None
    bridge: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown path mode {self.mode!r}")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be at least 1")
        if self.mode == "absorption" and not (self.y is not None and self.y > 0):
            raise ConfigurationError("absorption mode needs y > 0")
        if self.mode == "horizon" and not (self.T is not None and self.T > 0):
            raise ConfigurationError("horizon mode needs T > 0")

    @property
    def model(self) -> ModelSpace:
        return parse_space(self.space, self.covariance)


@dataclass
class PathState:
    point: PointFrame
    b: float
    m: np.ndarray
    t: float
    index: int = 0


@dataclass
class PathRecord:
    """All states and consumed increments of one path.

    Step i goes from state i to state i+1 over ``h[i]`` with frame noise
    ``noise[i]`` (standard normal, so dW = sqrt(h) * noise) and height
    increment ``dB[i]``.
    """

    space: ModelSpace
    mode: str
    positions: np.ndarray
    frames: np.ndarray
    b: np.ndarray
    m: np.ndarray
    t: np.ndarray
    h: np.ndarray
    noise: np.ndarray
    dB: np.ndarray
    censored: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return len(self.h)

    @property
    def tau(self) -> float:
        return float(self.t[-1])

    @property
    def exit_point(self) -> np.ndarray:
        return self.positions[-1]

    @property
    def dW(self) -> np.ndarray:
        return np.sqrt(self.h)[:, None] * self.noise

    def state(self, i: int) -> PathState:
        return PathState(PointFrame(self.positions[i], self.frames[i]), float(self.b[i]),
                         self.m[i], float(self.t[i]), i)


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, path index)."""
    key = (int(seed) % 2**64) * 2**64 + int(index) % 2**64
    return np.random.Generator(np.random.Philox(key=key))


def m_step(space: ModelSpace, m: np.ndarray, before: PointFrame, after: PointFrame, h: float):
    """Exact exponential of -h/2 (Ric + Hess phi) for the piecewise-constant curvature."""
    if space.kind == "quartic":
        mid = 0.5 * (before.position[0] + after.position[0])
        return math.exp(-0.5 * 3.0 * mid * mid * h) * m
    k = np.diag(curvature_action(space, before))
    return np.exp(-0.5 * k * h)[:, None] * m


class _Noise:
    """Either fresh draws from the path generator or a fixed injected sequence."""

    def __init__(self, rng, dim, injected):
        self.rng = rng
        self.dim = dim
        self.injected = injected
        self.i = 0

    def next(self):
        if self.injected is None:
            return self.rng.standard_normal(self.dim), float(self.rng.standard_normal())
        zw, zb = self.injected
        if self.i >= len(zb):
            return None
        out = np.asarray(zw[self.i], dtype=float).reshape(self.dim), float(zb[self.i])
        self.i += 1
        return out


def _simulate(config: PathConfig, start: PointFrame | None, injected) -> PathRecord:
    space = config.model
    rng = path_rng(config.seed, config.path_index)
    state = start.copy() if start is not None else sample_stationary(space, rng)
    d = space.dim
    m = np.eye(d)
    absorbing = config.mode == "absorption"
    b = float(config.y) if absorbing else 0.0
    t = 0.0
    pos, frames, bs, ms, ts = [state.position], [state.frame], [b], [m], [t]
    hs, noises, dbs = [], [], []
    noise = _Noise(rng, d, injected)
    bridge = config.bridge and injected is None
    censored = True
    for _ in range(config.max_steps):
        h = config.dt
        if not absorbing:
            h = min(h, config.T - t)
        draw = noise.next()
        if draw is None:
            break
        zw, zb = draw
        db = math.sqrt(h) * zb if absorbing else 0.0
        hit = False
        if absorbing:
            bn = b + db
            if bn <= 0.0:
                # linear interpolation of the crossing
                h = h * b / (b - bn)
                hit = True
            elif bridge and rng.random() < math.exp(-2.0 * b * bn / h):
                h = h * rng.random()
                hit = True
            if hit:
                db = -b
        new = step_diffusion(space, state, h, zw)
        m = m_step(space, m, state, new, h)
        state = new
        t += h
        b = 0.0 if hit else b + db
        pos.append(state.position)
        frames.append(state.frame)
        bs.append(b)
        ms.append(m)
        ts.append(t)
        hs.append(h)
        noises.append(zw)
        dbs.append(db)
        if hit or (not absorbing and t >= config.T * (1 - 1e-15)):
            censored = False
            break
    if not np.all(np.isfinite(m)):
        raise SimulationFault("non-finite multiplicative functional")
    return PathRecord(space, config.mode, np.array(pos), np.array(frames), np.array(bs),
                      np.array(ms), np.array(ts), np.array(hs), np.array(noises).reshape(-1, d),
                      np.array(dbs), censored=censored,
                      meta={"seed": config.seed, "path_index": config.path_index, "dt": config.dt})


def simulate_background_radiation(config: PathConfig, start: PointFrame | None = None,
                                  noise=None) -> PathRecord:
    """Run (X, B) from (start or a stationary draw, y) until B hits 0.

    ``noise`` optionally injects ``(frame_normals, height_normals)``; the
    bridge test is then off and the path ends when the sequence does.
    """
    if config.mode != "absorption":
        raise ConfigurationError("simulate_background_radiation needs absorption mode")
    return _simulate(config, start, noise)


def simulate_heat_horizon(config: PathConfig, start: PointFrame | None = None,
                          noise=None) -> PathRecord:
    if config.mode != "horizon":
        raise ConfigurationError("simulate_heat_horizon needs horizon mode")
    return _simulate(config, start, noise)


def replay(record: PathRecord) -> PathRecord:
    """Re-run the stored increments through the stepper."""
    state = PointFrame(record.positions[0].copy(), record.frames[0].copy())
    m = np.eye(record.space.dim)
    pos, frames, ms = [state.position], [state.frame], [m]
    for h, z in zip(record.h, record.noise):
        new = step_diffusion(record.space, state, float(h), z)
        m = m_step(record.space, m, state, new, float(h))
        state = new
        pos.append(state.position)
        frames.append(state.frame)
        ms.append(m)
    return PathRecord(record.space, record.mode, np.array(pos), np.array(frames), record.b.copy(),
                      np.array(ms), record.t.copy(), record.h.copy(), record.noise.copy(),
                      record.dB.copy(), record.censored, dict(record.meta))


def reverse_record(record: PathRecord) -> PathRecord:
    """Re-index a finished path by t -> tau - t.

    Step i of the result runs from reversed state i to i+1 and carries the
    forward step n-1-i with its increments negated. ``m`` is replaced by
    M_tau M_{tau-s}^{-1}, the functional of the reversed path.
    """
    n = record.n_steps
    m_tau = record.m[-1]
    mhat = np.array([m_tau @ np.linalg.inv(record.m[n - k]) for k in range(n + 1)])
    rev_noise = -record.noise[::-1]
    return PathRecord(record.space, record.mode, record.positions[::-1].copy(),
                      record.frames[::-1].copy(), record.b[::-1].copy(), mhat,
                      record.tau - record.t[::-1], record.h[::-1].copy(), rev_noise,
                      -record.dB[::-1], record.censored, dict(record.meta, reversed=True))


def ito_accumulate(record: PathRecord, integrand, driver: str = "dB") -> np.ndarray:
    """Left-point sum of integrand(state_i) against dB_i or dW_i.

    Against dW the integrand's last axis is contracted with the frame increment.
    """
    if driver not in DRIVERS:
        raise ConfigurationError(f"unknown driver {driver!r}")
    total = None
    inc_w = record.dW
    for i in range(record.n_steps):
        v = np.asarray(integrand(record.state(i)), dtype=float)
        term = v * record.dB[i] if driver == "dB" else v @ inc_w[i]
        total = term if total is None else total + term
    if total is None:
        return np.zeros(())
    return np.asarray(total, dtype=float)
