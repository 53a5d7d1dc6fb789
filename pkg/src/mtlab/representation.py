"""Martingale-transform payoffs, conditioning on the exit point, and the identity checks.

Record-level payoffs (``riesz_forward_payoff`` and friends) work on a single
:class:`~mtlab.pathsim.PathRecord`. The Monte Carlo pipelines (``riesz_mc``,
``ba_mc``) run the compiled kernels in fixed blocks of paths; every path draws
from its own counter-based stream, so the output does not depend on how the
blocks are spread over workers.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .forms import FormEndomorphism, build_endomorphisms, hodge_oracle, PAIRINGS
from .geometry import ConfigurationError, ModelSpace, TWO_PI
from .pathsim import PathRecord, reverse_record
from .spectral import (SpectralField, basis_gradients, basis_values, form_kernel_table,
                       kernel_table, riesz_oracle, synthesize)

VARIANTS = ("corrected", "uncorrected")
# weight of the second-order compensator in the reversed Riesz sum
COMPENSATORS = {"dB2": 0, "dt": 1, "sym": 2}
BA_COMPENSATORS = {"dX2": 0, "dt": 1}
# which extension the compensator differentiates: Q_a f, or the unshifted Q_0 f
EXTENSIONS = ("extended", "literal")
BA_READINGS = ("heat_killed", "heat")

RIESZ_OUTER = -2.0
BA_OUTER = 1.0
Y_SCHEDULE = (2.0, 4.0, 6.0)
T_SCHEDULE = (2.0, 4.0, 8.0)
COUNT_FLOOR = 30
BLOCK = 2000


@dataclass
class Payoff:
    vector: np.ndarray | None
    exit_point: np.ndarray
    tau: float
    censored: bool = False
    variant: str = "corrected"


def _censored(record: PathRecord, variant: str) -> Payoff:
    return Payoff(None, record.exit_point, record.tau, True, variant)


# -- extension tables on a record ------------------------------------------------------

def _extension(f: SpectralField, a: float, pts, heights, frames):
    """Frame components of grad Q_a f, d/dy grad Q_a f and d/dy grad Q_0 f at (pts, heights)."""
    if f.kind != "function":
        raise ConfigurationError("payoffs take a scalar function field")
    c = f.coeffs.reshape(-1)
    lam = np.maximum(f.eigenvalues().reshape(-1), 0.0)
    rate = np.sqrt(a + lam)
    rate0 = np.sqrt(lam)
    heights = np.asarray(heights, dtype=float)[:, None]
    dec = np.exp(-heights * rate)
    dec0 = np.exp(-heights * rate0)
    grads = basis_gradients(f.space, pts, f.cutoff, f.oracle)
    g = np.einsum("nmd,nm,m->nd", grads, dec, c)
    gy = np.einsum("nmd,nm,m->nd", grads, -rate * dec, c)
    gy0 = np.einsum("nmd,nm,m->nd", grads, -rate0 * dec0, c)
    out = []
    for v in (g, gy, gy0):
        v = v.real if np.iscomplexobj(v) else v
        out.append(np.einsum("nid,nd->ni", frames, v))
    return out


def _record_extension(record: PathRecord, f, a):
    return _extension(f, a, record.positions, record.b, record.frames)


def riesz_forward_payoff(record: PathRecord, f: SpectralField, a: float,
                         variant: str = "corrected") -> Payoff:
    """Terminal factor times the completed sum of e^{as/2} M_s^{-1} grad Q_a f dB_s.

    The vector is in the frame at the exit point. ``uncorrected`` moves the
    terminal factor inside the sum.
    """
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}")
    if record.censored:
        return _censored(record, variant)
    g, _, _ = _record_extension(record, f, a)
    n = record.n_steps
    t, m, tau = record.t, record.m, record.tau
    if variant == "corrected":
        inner = np.zeros(record.space.dim)
        for i in range(n):
            inner += math.exp(0.5 * a * t[i]) * np.linalg.solve(m[i], g[i]) * record.dB[i]
        vec = math.exp(-0.5 * a * tau) * (m[n] @ inner)
    else:
        vec = np.zeros(record.space.dim)
        for i in range(n):
            vec += math.exp(0.5 * a * (t[i] - tau)) * (m[n] @ np.linalg.solve(m[i], g[i])) * record.dB[i]
    return Payoff(vec, record.exit_point, tau, False, variant)


def riesz_reversed_payoff(record: PathRecord, f: SpectralField, a: float,
                          compensator: str = "sym", extension: str = "extended") -> Payoff:
    """Re-indexed sum with right-point evaluation and the d/dy compensator.

    Step i contributes w_i (g(Z_{i+1}) dB_i - d/dy g(Z_{i+1}) q_i) with the
    forward weight w_i = e^{-a(tau - t_i)/2} M_tau M_{t_i}^{-1} and
    q_i = dB_i^2, h_i or their mean (``compensator``).
    """
    if compensator not in COMPENSATORS or extension not in EXTENSIONS:
        raise ConfigurationError("unknown compensator or extension reading")
    if record.censored:
        return _censored(record, "reversed")
    g, gy, gy0 = _record_extension(record, f, a)
    gyy = gy if extension == "extended" else gy0
    n, t, m, tau = record.n_steps, record.t, record.m, record.tau
    vec = np.zeros(record.space.dim)
    for i in range(n):
        db, h = record.dB[i], record.h[i]
        q = (db * db, h, 0.5 * (db * db + h))[COMPENSATORS[compensator]]
        term = g[i + 1] * db - gyy[i + 1] * q
        vec += math.exp(-0.5 * a * (tau - t[i])) * (m[n] @ np.linalg.solve(m[i], term))
    return Payoff(vec, record.exit_point, tau, False, "reversed")


def reindexed_forward_sum(record: PathRecord, f: SpectralField, a: float) -> np.ndarray:
    """The forward sum computed on the time-reversed record.

    Reversed step k is forward step n-1-k read backwards, so the forward
    left point is the reversed right point and dB = -dB_hat; the weight
    M_tau M_s^{-1} is the reversed functional. Equal to the forward payoff up
    to summation order.
    """
    rev = reverse_record(record)
    g, _, _ = _record_extension(rev, f, a)
    vec = np.zeros(record.space.dim)
    for k in range(rev.n_steps):
        vec += math.exp(-0.5 * a * rev.t[k + 1]) * (rev.m[k + 1] @ g[k + 1]) * (-rev.dB[k])
    return vec


# -- Beurling-Ahlfors on horizon records -----------------------------------------------

def _form_rates(w: SpectralField, a: float, reading: str):
    if reading not in BA_READINGS:
        raise ConfigurationError(f"unknown heat reading {reading!r}")
    lam = w.eigenvalues()
    return 0.5 * (lam + a) if reading == "heat_killed" else 0.5 * lam


def _heat_form_at(w: SpectralField, rates, x, s):
    """(du[j, l], ddu[k, j, l]) of the heat-extended torus 1-form at remaining time s."""
    K = w.cutoff
    ks = np.arange(-K, K + 1)
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")
    phase = np.exp(1j * (k1 * x[0] + k2 * x[1]))
    c = w.coeffs * np.exp(-s * rates) * phase
    kv = (k1, k2)
    du = np.array([[np.sum(1j * kv[j] * c[l]).real for l in range(2)] for j in range(2)])
    ddu = np.array([[[np.sum(-kv[k] * kv[j] * c[l]).real for l in range(2)]
                     for j in range(2)] for k in range(2)])
    return du, ddu


def _require_ba(record, w):
    if record.mode != "horizon":
        raise ConfigurationError("Beurling-Ahlfors payoffs need a horizon record")
    if w.space.kind != "torus" or w.space.dim != 2 or w.kind != "form":
        raise ConfigurationError("Beurling-Ahlfors payoffs are built for torus2 1-forms")


def ba_forward_payoff(record: PathRecord, w: SpectralField, a: float,
                      endo: FormEndomorphism | None = None, variant: str = "corrected",
                      pairing: str = "increment-first", reading: str = "heat_killed") -> Payoff:
    """Sum of e^{-a(T - t)/2} B grad w_a(X_t, T - t) dX_t on the flat 2-torus (M = Id)."""
    _require_ba(record, w)
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}")
    if record.censored:
        return _censored(record, variant)
    endo = endo or build_endomorphisms(2, 1)[2]
    rates = _form_rates(w, a, reading)
    T = record.tau
    dx = record.dW
    vec = np.zeros(2)
    for i in range(record.n_steps):
        du, _ = _heat_form_at(w, rates, record.positions[i], T - record.t[i])
        term = endo.contract(du, dx[i], pairing)
        if variant == "corrected":
            vec += math.exp(0.5 * a * record.t[i]) * term
        else:
            vec += math.exp(-0.5 * a * (T - record.t[i])) * term
    if variant == "corrected":
        vec *= math.exp(-0.5 * a * T)
    return Payoff(vec, record.exit_point, T, False, variant)


def ba_reversed_payoff(record: PathRecord, w: SpectralField, a: float,
                       endo: FormEndomorphism | None = None, compensator: str = "dX2",
                       pairing: str = "increment-first", reading: str = "heat_killed") -> Payoff:
    """Right-point sum at the same heat time, minus the second-derivative compensator."""
    _require_ba(record, w)
    if compensator not in BA_COMPENSATORS:
        raise ConfigurationError(f"unknown compensator {compensator!r}")
    if record.censored:
        return _censored(record, "reversed")
    endo = endo or build_endomorphisms(2, 1)[2]
    table = endo.table if pairing == "increment-first" else endo.table.transpose(1, 0, 2, 3)
    rates = _form_rates(w, a, reading)
    T = record.tau
    dx = record.dW
    vec = np.zeros(2)
    for i in range(record.n_steps):
        du, ddu = _heat_form_at(w, rates, record.positions[i + 1], T - record.t[i])
        term = np.einsum("ijml,jl,i->m", table, du, dx[i])
        if compensator == "dX2":
            comp = np.einsum("ijml,kjl,k,i->m", table, ddu, dx[i], dx[i])
        else:
            comp = np.einsum("ijml,ijl->m", table, ddu) * record.h[i]
        vec += math.exp(-0.5 * a * (T - record.t[i])) * (term - comp)
    return Payoff(vec, record.exit_point, T, False, "reversed")


# -- binning -------------------------------------------------------------------------

@dataclass(frozen=True)
class BinGrid:
    """Hard bins in chart coordinates (angles (theta, phi) on the sphere)."""

    space: ModelSpace
    shape: tuple
    lo: tuple
    hi: tuple

    @property
    def nbins(self) -> int:
        return int(np.prod(self.shape))

    def coords(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.space.kind == "sphere":
            theta = np.arccos(np.clip(points[:, 2], -1.0, 1.0))
            phi = np.mod(np.arctan2(points[:, 1], points[:, 0]), TWO_PI)
            return np.stack([theta, phi], axis=-1)
        return points[:, : self.space.dim]

    def index(self, points) -> np.ndarray:
        c = self.coords(points)
        lo, hi, shape = np.array(self.lo), np.array(self.hi), np.array(self.shape)
        rel = (c - lo) / (hi - lo)
        idx = np.floor(rel * shape).astype(np.int64)
        inside = np.all((rel >= 0) & (rel <= 1), axis=1)
        idx = np.minimum(idx, shape - 1)
        flat = np.ravel_multi_index(tuple(np.clip(idx, 0, shape - 1).T), self.shape)
        return np.where(inside, flat, -1)

    def edges(self, axis: int) -> np.ndarray:
        return np.linspace(self.lo[axis], self.hi[axis], self.shape[axis] + 1)

    @property
    def centers(self) -> np.ndarray:
        mids = [0.5 * (e[1:] + e[:-1]) for e in (self.edges(k) for k in range(len(self.shape)))]
        mesh = np.meshgrid(*mids, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def to_points(self, coords) -> np.ndarray:
        coords = np.atleast_2d(coords)
        if self.space.kind == "sphere":
            th, ph = coords[:, 0], coords[:, 1]
            return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
        return coords

    def cell_average(self, fn, sub: int = 24) -> np.ndarray:
        """mu-weighted average of fn(points) over each cell by midpoint sub-sampling."""
        out = []
        frac = (np.arange(sub) + 0.5) / sub
        for cell in range(self.nbins):
            pos = np.unravel_index(cell, self.shape)
            axes = []
            for k, j in enumerate(pos):
                e = self.edges(k)
                axes.append(e[j] + (e[j + 1] - e[j]) * frac)
            mesh = np.meshgrid(*axes, indexing="ij")
            coords = np.stack([m.ravel() for m in mesh], axis=-1)
            pts = self.to_points(coords)
            if self.space.kind == "sphere":
                wts = np.sin(coords[:, 0])
            else:
                wts = self.space.density(pts)
            vals = np.asarray(fn(pts))
            out.append(np.einsum("n,n...->...", wts, vals) / wts.sum())
        return np.array(out)


def default_grid(space: ModelSpace, bins: int | None = None) -> BinGrid:
    if space.kind == "torus":
        n = bins or 32
        return BinGrid(space, (n,) * space.dim, (0.0,) * space.dim, (TWO_PI,) * space.dim)
    if space.kind == "gauss":
        n = bins or 32
        return BinGrid(space, (n,) * space.dim, (-4.0,) * space.dim, (4.0,) * space.dim)
    if space.kind == "quartic":
        return BinGrid(space, (bins or 32,), (-2.5,), (2.5,))
    return BinGrid(space, (8, 16), (0.0, 0.0), (math.pi, TWO_PI))


@dataclass
class FieldEstimate:
    grid: BinGrid
    mean: np.ndarray  # (nbins, ncomp)
    stderr: np.ndarray
    count: np.ndarray
    censored: int = 0
    floor: int = COUNT_FLOOR
    meta: dict = field(default_factory=dict)

    @property
    def mask(self) -> np.ndarray:
        """True on bins reported (count at or above the floor)."""
        return self.count >= self.floor

    @property
    def centers(self) -> np.ndarray:
        return self.grid.centers

    def z_scores(self, oracle: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.mean - oracle) / self.stderr


def condition_on_exit(points, vectors, grid: BinGrid, outer: float = 1.0, censored: int = 0,
                      floor: int = COUNT_FLOOR, meta: dict | None = None) -> FieldEstimate:
    """Per-bin mean and standard error of outer * vector keyed by the exit point."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    idx = grid.index(points)
    keep = idx >= 0
    idx, v = idx[keep], outer * vectors[keep]
    nb = grid.nbins
    count = np.bincount(idx, minlength=nb)
    s1 = np.stack([np.bincount(idx, v[:, j], minlength=nb) for j in range(v.shape[1])], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = s1 / count[:, None]
        dev = v - mean[idx]
        s2 = np.stack([np.bincount(idx, dev[:, j] ** 2, minlength=nb) for j in range(v.shape[1])],
                      axis=-1)
        var = s2 / (count[:, None] - 1)
        stderr = np.sqrt(var / count[:, None])
    mean[count == 0] = np.nan
    stderr[count < 2] = np.nan
    return FieldEstimate(grid, mean, stderr, count, int(censored), floor, dict(meta or {}))


def condition_payoffs(payoffs, grid: BinGrid, outer: float = 1.0, ambient=None) -> FieldEstimate:
    """condition_on_exit over Payoff objects; censored payoffs are counted, not binned."""
    live = [p for p in payoffs if not p.censored]
    cens = len(payoffs) - len(live)
    if not live:
        return condition_on_exit(np.zeros((0, 3)), np.zeros((0, 1)), grid, outer, cens)
    vecs = np.array([ambient(p) if ambient else p.vector for p in live])
    pts = np.array([p.exit_point for p in live])
    return condition_on_exit(pts, vecs, grid, outer, cens)


def oracle_on_grid(field_: SpectralField, grid: BinGrid) -> np.ndarray:
    """mu-weighted cell averages of a field (ambient components on the sphere)."""
    return grid.cell_average(lambda pts: synthesize(field_, pts))


# -- parallel blocks ------------------------------------------------------------------

def _blocks(N: int, block: int):
    return [(s, min(block, N - s)) for s in range(0, N, block)]


def run_blocks(fn, payload, N: int, workers: int = 1, block: int = BLOCK) -> np.ndarray:
    """Concatenate fn(payload, start, count) over fixed blocks, in block order."""
    jobs = _blocks(N, block)
    if workers <= 1 or len(jobs) == 1:
        parts = [fn(payload, s, c) for s, c in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(fn, [payload] * len(jobs), [s for s, _ in jobs], [c for _, c in jobs]))
    return np.concatenate(parts, axis=0)


def default_workers() -> int:
    return max(1, int(os.environ.get("MTLAB_WORKERS", "1")))


# -- Riesz pipeline --------------------------------------------------------------------

@dataclass(frozen=True)
class RieszSettings:
    dt: float = 1e-3
    kappa: float = 0.0025
    hmax: float = 0.01
    tail_eps: float = 1e-3
    mix_time: float = 40.0
    max_steps: int = 10**7
    compensator: str = "sym"
    extension: str = "extended"


def _field_table(space: ModelSpace, kt):
    r = space.rates
    return kernels.FieldTable(space.code, space.dim, kt.ti, kt.tf, kt.rates, kt.rates0, kt.grid,
                              kt.grid2, kt.grid_x0, kt.grid_dx, float(r[0]), float(r[1]))


def _riesz_block(payload, start, count):
    space, kt, a, y, st, levels, seed = payload
    out = np.zeros((count, 14 + 3 * len(levels)))
    b_live = math.log(1.0 / st.tail_eps) / kt.min_rate if math.isfinite(kt.min_rate) else 0.0
    kernels.riesz_batch(_field_table(space, kt), a, y, st.dt, st.kappa, st.hmax, st.max_steps,
                        b_live, st.mix_time, int(st.extension == "literal"),
                        COMPENSATORS[st.compensator], np.asarray(levels, dtype=float),
                        seed, start, out)
    return out


@dataclass
class RieszRun:
    forward: FieldEstimate
    reversed: FieldEstimate
    levels: dict
    oracle: np.ndarray
    raw: np.ndarray
    stabilization: dict
    diagnostics: dict


def _payoff_columns(raw, base, ncomp):
    return raw[:, base: base + ncomp]


def riesz_mc(space: ModelSpace, f: SpectralField, a: float, y: float = 6.0, N: int = 10000,
             grid: BinGrid | None = None, seed: int = 0, settings: RieszSettings | None = None,
             workers: int | None = None, block: int = BLOCK) -> RieszRun:
    """Stationary starts, kernel paths to absorption, conditioning, oracle comparison.

    Lower entries of the height schedule are read off the same paths from
    their first passage below that level.
    """
    st = settings or RieszSettings()
    if st.compensator not in COMPENSATORS or st.extension not in EXTENSIONS:
        raise ConfigurationError("unknown compensator or extension reading")
    if a < 0 or y <= 0 or N < 1:
        raise ConfigurationError("riesz_mc needs a >= 0, y > 0, N >= 1")
    if f.space != space:
        raise ConfigurationError("field and space differ")
    grid = grid or default_grid(space)
    levels = tuple(v for v in Y_SCHEDULE if v < y)[::-1]
    kt = kernel_table(f, a)
    t0 = time.perf_counter()
    raw = run_blocks(_riesz_block, (space, kt, a, y, st, levels, seed), N,
                     workers or default_workers(), block)
    elapsed = time.perf_counter() - t0
    live = raw[:, 4] == 0
    ncomp = space.ambient_dim
    pts = raw[live, :3]
    cens = int((~live).sum())
    meta = dict(y=y, a=a, N=N, dt=st.dt, seed=seed, space=space.key)
    fwd = condition_on_exit(pts, raw[live, 5:5 + ncomp], grid, RIESZ_OUTER, cens, meta=meta)
    rev = condition_on_exit(pts, raw[live, 8:8 + ncomp], grid, RIESZ_OUTER, cens,
                            meta=dict(meta, variant="reversed"))
    lv = {}
    for k, level in enumerate(levels):
        base = 14 + 3 * k
        lv[level] = condition_on_exit(pts, raw[live, base:base + ncomp], grid, RIESZ_OUTER, cens,
                                      meta=dict(meta, y=level))
    oracle = oracle_on_grid(riesz_oracle(f, a), grid)
    stab = {}
    prev = fwd
    for level in levels:
        est = lv[level]
        m = prev.mask & est.mask
        diff = np.abs(prev.mean - est.mean)[m]
        se = np.maximum(prev.stderr, est.stderr)[m]
        stab[f"{level:g}->{prev.meta['y']:g}"] = dict(
            sup_diff=float(diff.max()) if diff.size else 0.0,
            max_stderr=float(se.max()) if se.size else 0.0,
            passed=bool(diff.size) and bool(np.all(diff <= se)))
        prev = est
    diag = dict(censoring_rate=cens / N, mean_steps=float(raw[:, 12].mean()),
                regenerations=float(raw[:, 13].mean()), runtime=elapsed,
                mean_tau=float(raw[live, 3].mean()) if live.any() else float("nan"),
                valid=cens / N <= 0.01)
    return RieszRun(fwd, rev, lv, oracle, raw, stab, diag)


# -- Beurling-Ahlfors pipeline ------------------------------------------------------------

@dataclass(frozen=True)
class BASettings:
    dt: float = 2e-3
    compensator: str = "dX2"
    pairing: str = "increment-first"
    reading: str = "heat_killed"


def _ba_block(payload, start, count):
    ti, tf, rate, rate_res, bt, a, T, st, seed = payload
    out = np.zeros((count, 9))
    kernels.ba_batch(ti, tf, rate, rate_res, bt, a, T, st.dt,
                     BA_COMPENSATORS[st.compensator], seed, start, out)
    return out


def ba_horizon_oracle(w: SpectralField, a: float, T: float) -> SpectralField:
    """Target of the finite-horizon estimator: S_B w with modes scaled by 1 - e^{-T(a + lambda)}."""
    full = hodge_oracle(w, "S_B", a)
    lam = w.eigenvalues()
    return replace(full, coeffs=full.coeffs * (1.0 - np.exp(-T * (a + lam))))


@dataclass
class BARun:
    forward: FieldEstimate
    reversed: FieldEstimate
    oracle: np.ndarray
    oracle_limit: np.ndarray
    residual: dict
    raw: np.ndarray
    stabilization: dict
    diagnostics: dict


def ba_mc(w: SpectralField, a: float = 0.0, T: float = 4.0, N: int = 10000,
          grid: BinGrid | None = None, seed: int = 0, endo: FormEndomorphism | None = None,
          settings: BASettings | None = None, workers: int | None = None,
          block: int = BLOCK) -> BARun:
    st = settings or BASettings()
    if w.space.kind != "torus" or w.space.dim != 2 or w.kind != "form":
        raise ConfigurationError("ba_mc runs on torus2 1-forms")
    if st.pairing not in PAIRINGS or st.compensator not in BA_COMPENSATORS:
        raise ConfigurationError("unknown pairing or compensator")
    if a < 0 or T <= 0 or N < 1:
        raise ConfigurationError("ba_mc needs a >= 0, T > 0, N >= 1")
    endo = endo or build_endomorphisms(2, 1)[2]
    table = endo.table if st.pairing == "increment-first" else endo.table.transpose(1, 0, 2, 3)
    bt = np.ascontiguousarray(table, dtype=float).ravel()
    ti, tf, lam = form_kernel_table(w)
    rate = 0.5 * (lam + a) if st.reading == "heat_killed" else 0.5 * lam
    grid = grid or BinGrid(w.space, (8, 8), (0.0, 0.0), (TWO_PI, TWO_PI))
    t0 = time.perf_counter()
    raw = run_blocks(_ba_block, (ti, tf, rate, 0.5 * lam, bt, a, T, st, seed), N,
                     workers or default_workers(), block)
    elapsed = time.perf_counter() - t0
    pts = raw[:, :2]
    meta = dict(T=T, a=a, N=N, dt=st.dt, seed=seed, space="torus2")
    fwd = condition_on_exit(pts, raw[:, 2:4], grid, BA_OUTER, meta=meta)
    rev = condition_on_exit(pts, raw[:, 4:6], grid, BA_OUTER, meta=dict(meta, variant="reversed"))
    oracle = oracle_on_grid(ba_horizon_oracle(w, a, T), grid)
    limit = oracle_on_grid(hodge_oracle(w, "S_B", a), grid)
    res = raw[:, 6:8]
    residual = dict(mean=res.mean(axis=0).tolist(),
                    stderr=(res.std(axis=0, ddof=1) / math.sqrt(max(N, 2))).tolist())
    stab = {}
    for lo_T, hi_T in zip(T_SCHEDULE[:-1], T_SCHEDULE[1:]):
        gap = oracle_on_grid(ba_horizon_oracle(w, a, hi_T), grid) - \
            oracle_on_grid(ba_horizon_oracle(w, a, lo_T), grid)
        stab[f"{lo_T:g}->{hi_T:g}"] = float(np.abs(gap).max())
    diag = dict(runtime=elapsed, steps=float(raw[0, 8]) if N else 0.0)
    return BARun(fwd, rev, oracle, limit, residual, raw, stab, diag)


# -- identity checks ---------------------------------------------------------------------

@dataclass(frozen=True)
class IntervalProfile:
    """g = level on [lo, hi], zero elsewhere."""

    lo: float
    hi: float
    level: float = 1.0

    def exact_green(self, y: float) -> float:
        """2 * integral of (y ^ z) g(z) dz."""
        lo, hi = self.lo, self.hi
        below = max(0.0, min(hi, y) - lo)
        a1, b1 = lo, lo + below
        inner = b1 * b1 - a1 * a1
        outer = 2.0 * y * max(0.0, hi - max(lo, y))
        return self.level * (inner + outer)


def littlewood_paley_check(g: IntervalProfile | None, y: float, N: int, seed: int = 0,
                           dt: float = 1e-4, kappa: float = 0.0025, max_steps: int = 10**7,
                           workers: int | None = None):
    """(mc-value, exact-value, z-score) for E_y of the occupation integral of g(B)."""
    if g is None or g.level == 0.0 or g.hi <= g.lo:
        return 0.0, 0.0, 0.0
    if g.lo < 0:
        raise ConfigurationError("profile must live on the half-line")
    raw = run_blocks(_occupation_block, (g.lo, g.hi, y, dt, kappa, max_steps, seed), N,
                     workers or default_workers(), 10000)
    occ = g.level * raw[raw[:, 2] == 0, 0]
    mc = float(occ.mean())
    se = float(occ.std(ddof=1) / math.sqrt(len(occ)))
    exact = g.exact_green(y)
    return mc, exact, (mc - exact) / se if se > 0 else 0.0


def _occupation_block(payload, start, count):
    lo, hi, y, dt, kappa, max_steps, seed = payload
    out = np.zeros((count, 4))
    kernels.occupation_batch(lo, hi, y, dt, kappa, max_steps, seed, start, out)
    return out


def ito_extension_check(record: PathRecord, eta: SpectralField, a: float) -> np.ndarray:
    """e^{-a tau/2} eta(X_tau) - eta_a(X_0, y) - sum e^{-as/2} (grad . dX + d/dy . dB) on a flat record.

    Forms on a flat torus are handled componentwise.
    """
    if record.space.kind != "torus":
        raise ConfigurationError("the record-level identity is checked on flat tori")
    comps = [eta] if eta.kind == "function" else [
        SpectralField(eta.space, eta.coeffs[l:l + 1]) for l in range(eta.ncomp)]
    res = []
    dW = record.dW
    for comp in comps:
        c = comp.coeffs.reshape(-1)
        lam = comp.eigenvalues().reshape(-1)
        rate = np.sqrt(a + lam)
        dec = np.exp(-record.b[:, None] * rate)
        vals = basis_values(comp.space, record.positions, comp.cutoff) * dec
        grads = basis_gradients(comp.space, record.positions, comp.cutoff) * dec[..., None]
        F = (vals @ c).real
        gx = np.einsum("nmd,m->nd", grads, c).real
        gy = (-(vals * rate) @ c).real
        n = record.n_steps
        w = np.exp(-0.5 * a * record.t[:n])
        s = np.sum(w * (np.einsum("nd,nd->n", gx[:n], dW) + gy[:n] * record.dB))
        res.append(math.exp(-0.5 * a * record.tau) * F[-1] - F[0] - s)
    return np.array(res)


def _ito_block(payload, start, count):
    space, kt, a, y, dt, kappa, max_steps, seed = payload
    out = np.zeros((count, 4))
    kernels.ito_batch(_field_table(space, kt), a, y, dt, kappa, max_steps, seed, start, out)
    return out


def ito_residuals(f: SpectralField, a: float, y: float, N: int, dt: float = 1e-3,
                  kappa_ratio: float = 10.0, seed: int = 0, max_steps: int = 10**7,
                  workers: int | None = None) -> np.ndarray:
    """Per-path residuals of the Poisson-extension identity on a flat torus (kernel paths).

    Steps are max(dt, kappa b^2) with kappa = kappa_ratio * dt, so halving dt
    halves every step.
    """
    if f.space.kind != "torus":
        raise ConfigurationError("ito_residuals runs on flat tori")
    kt = kernel_table(f, a)
    raw = run_blocks(_ito_block, (f.space, kt, a, y, dt, kappa_ratio * dt, max_steps, seed), N,
                     workers or default_workers())
    return raw[raw[:, 2] == 0, 0]


def _drift_block(payload, start, count):
    y, dt, lo, hi, max_steps, seed = payload
    out = np.zeros((count, 4))
    kernels.reversed_drift_batch(y, dt, lo, hi, max_steps, seed, start, out)
    return out


def reversed_drift_estimate(N: int, y: float = 2.0, dt: float = 1e-3, window=(0.1, 0.5),
                            seed: int = 0, max_steps: int = 10**7, workers: int | None = None):
    """Weighted least-squares coefficient c in dB_hat = c dt / B_hat + noise, with its stderr."""
    lo, hi = window
    raw = run_blocks(_drift_block, (y, dt, lo, hi, max_steps, seed), N,
                     workers or default_workers(), 10000)
    num, den = raw[:, 0].sum(), raw[:, 1].sum()
    return float(num / den), float(1.0 / math.sqrt(den))
