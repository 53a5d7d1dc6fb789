"""L^p norms under mu, closed-form bound formulas, and empirical operator-norm probes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .forms import build_endomorphisms, projection_symbol
from .geometry import ConfigurationError, ModelSpace
from .representation import RieszSettings, riesz_mc, run_blocks, default_workers
from .spectral import SpectralField, analysis_grid, hermite_table, synthesize

REGIMES = ("L2", "flat", "constant-negative", "general", "BA-flat", "BA-general", "comparison-CD")
SQRT6 = math.sqrt(6.0)


def p_star(p: float) -> float:
    if not p > 1:
        raise ConfigurationError("p must exceed 1")
    return max(p, p / (p - 1.0))


def burkholder_bp(p: float) -> float:
    """Square-function constant B_p."""
    if not p > 1:
        raise ConfigurationError("p must exceed 1")
    if p < 2:
        return math.sqrt(2.0 * p) * (p - 1.0) ** -1.5
    if p == 2:
        return 1.0
    return p / math.sqrt(2.0 * (p - 2.0))


def general_constant(p: float) -> float:
    """Explicit constant of the general-curvature Riesz bound."""
    if not p > 1:
        raise ConfigurationError("p must exceed 1")
    if p < 2:
        return 12.0 * SQRT6 * (p - 1.0) ** -1.5
    if p == 2:
        return 6.0 * SQRT6
    return 3.0 * math.sqrt(2.0) * p**1.5 * math.sqrt(2.0 * p - 1.0) / math.sqrt(p - 2.0)


@dataclass(frozen=True)
class NormBound:
    regime: str
    p: float
    p_star: float
    value: float
    constants: dict = field(default_factory=dict)


def bound_value(regime: str, p: float, **inputs) -> NormBound:
    """Upper bound on the operator norm in the given regime.

    ``constant-negative`` needs ``t1_norm``; the BA regimes take ``b_norm``
    (operator norm of the endomorphism, default 2).
    """
    if regime not in REGIMES:
        raise ConfigurationError(f"unknown regime {regime!r}")
    ps = p_star(p)
    if regime == "L2":
        if p != 2:
            raise ConfigurationError("the L2 bound is stated at p = 2")
        return NormBound(regime, p, ps, 1.0)
    if regime == "flat":
        return NormBound(regime, p, ps, 2.0 * (ps - 1.0))
    if regime == "constant-negative":
        if "t1_norm" not in inputs:
            raise ConfigurationError("constant-negative bound needs t1_norm")
        t1 = float(inputs["t1_norm"])
        return NormBound(regime, p, ps, 2.0 * (ps - 1.0) * (1.0 + 4.0 * t1), {"t1_norm": t1})
    if regime == "general":
        return NormBound(regime, p, ps, general_constant(p), {"B_p": burkholder_bp(p)})
    b = float(inputs.get("b_norm", 2.0))
    if regime == "BA-flat":
        return NormBound(regime, p, ps, 2.0 * (ps - 1.0) * b, {"b_norm": b})
    if regime == "BA-general":
        return NormBound(regime, p, ps, 6.0 * SQRT6 * (ps - 1.0) ** 1.5 * b, {"b_norm": b})
    return NormBound(regime, p, ps, 12.0 * (ps - 1.0))


# -- norms under mu ----------------------------------------------------------------------

def _quadrature(space: ModelSpace, oracle=None, resolution: int = 0):
    if space.kind == "torus":
        m = resolution or 256
        g = np.arange(m) * 2 * math.pi / m
        mesh = np.meshgrid(*([g] * space.dim), indexing="ij")
        pts = np.stack([c.ravel() for c in mesh], axis=-1)
        return pts, np.full(len(pts), 1.0 / len(pts))
    if space.kind == "gauss":
        return analysis_grid(space, resolution or 60)
    if space.kind == "quartic":
        return analysis_grid(space, 0, oracle)
    return analysis_grid(space, resolution or 48)


def lp_norm(source, p: float, space: ModelSpace | None = None) -> float:
    """(integral |v|^p dmu)^{1/p}, |v| the Euclidean norm of the components.

    ``source`` is a SpectralField, or a FieldEstimate (mean values weighted by
    bin counts, i.e. by the empirical exit law).
    """
    if p < 1:
        raise ConfigurationError("p must be at least 1")
    if isinstance(source, SpectralField):
        pts, w = _quadrature(source.space, source.oracle)
        v = synthesize(source, pts)
    else:
        est = source
        mask = est.count > 0
        v = est.mean[mask]
        w = est.count[mask] / est.count[mask].sum()
    mag = np.sqrt(np.sum(np.abs(v) ** 2, axis=-1))
    return float(np.sum(w * mag**p) ** (1.0 / p))


# -- exit time of the unit ball ------------------------------------------------------------

def _exit_block(payload, start, count):
    r0, dt_min, max_steps, seed = payload
    out = np.zeros((count, 3))
    kernels.exit_time_batch(r0, dt_min, max_steps, seed, start, out)
    return out


def exit_times(N: int, r0: float = 0.0, seed: int = 0, dt_min: float = 1e-5,
               max_steps: int = 10**7, workers: int | None = None) -> np.ndarray:
    if N < 1:
        raise ConfigurationError("N must be positive")
    raw = run_blocks(_exit_block, (r0, dt_min, max_steps, seed), N, workers or default_workers(),
                     20000)
    return raw[raw[:, 1] == 0, 0]


def moment_norm(samples, p: float):
    """(E X^p)^{1/p} and its delta-method standard error."""
    samples = np.asarray(samples, dtype=float)
    xp = samples**p
    m = xp.mean()
    se_m = xp.std(ddof=1) / math.sqrt(len(xp))
    val = m ** (1.0 / p)
    return float(val), float(val / (p * m) * se_m)


def exit_time_T1_norm(p: float, N: int, r0: float = 0.0, seed: int = 0,
                      workers: int | None = None):
    """(||T_1||_p estimate, stderr) for 3-d Brownian motion leaving the unit ball."""
    if N < 10**4:
        raise ConfigurationError("exit_time_T1_norm needs N >= 1e4")
    return moment_norm(exit_times(N, r0, seed, workers=workers), p)


def exit_time_moment(k: int, r0: float = 0.0) -> float:
    """Closed-form E T_1^k for k in {1, 2} from radius r0."""
    r2 = r0 * r0
    if k == 1:
        return (1.0 - r2) / 3.0
    if k == 2:
        # radial solution of (1/2) Lap u = -2 E[T]
        return (7.0 - 10.0 * r2 + 3.0 * r2 * r2) / 45.0
    raise ConfigurationError("closed forms for k = 1, 2 only")


# -- square function J_y -------------------------------------------------------------------

def j_y_norm(space: ModelSpace, f: SpectralField, a: float, y: float, p: float, N: int,
             seed: int = 0, settings: RieszSettings | None = None, workers: int | None = None,
             run=None):
    """(||J_y||_p, stderr, B_p ||f||_p); ``run`` reuses the paths of a riesz_mc result."""
    if not np.any(f.coeffs):
        return 0.0, 0.0, 0.0
    if run is None:
        run = riesz_mc(space, f, a, y, N, seed=seed, settings=settings, workers=workers)
    raw = run.raw[run.raw[:, 4] == 0]
    J = np.sqrt(raw[:, 11])
    val, se = moment_norm(J, p)
    return val, se, burkholder_bp(p) * lp_norm(f, p)


# -- operator norm search ------------------------------------------------------------------

@dataclass
class NormReport:
    operator: str
    space: str
    p: float
    empirical: float
    bounds: list
    passed: bool
    converged: bool
    trace: list = field(default_factory=list)


class _TorusOperator:
    """Fourier-multiplier operator on band-limited torus fields, evaluated by FFT.

    Fields are grid values; ``project`` is the band-limiting projector, which
    is self-adjoint for the uniform grid weights.
    """

    def __init__(self, dim: int, cutoff: int, symbol, n_in: int, n_out: int, resolution: int):
        self.dim, self.cutoff, self.m = dim, cutoff, resolution
        ks = np.fft.fftfreq(resolution, 1.0 / resolution)
        grids = np.meshgrid(*([ks] * dim), indexing="ij")
        self.k = np.stack(grids, axis=-1)
        self.band = np.all(np.abs(self.k) <= cutoff, axis=-1)
        self.sym = symbol(self.k)  # (..., n_out, n_in)
        self.n_in, self.n_out = n_in, n_out
        self.weight = 1.0 / resolution**dim

    def _fft(self, v):
        return np.fft.fftn(v, axes=tuple(range(self.dim)))

    def _ifft(self, c):
        return np.fft.ifftn(c, axes=tuple(range(self.dim))).real

    def project(self, v):
        c = self._fft(v)
        c[~self.band] = 0
        return self._ifft(c)

    def apply(self, v):
        c = self._fft(v)
        c[~self.band] = 0
        return self._ifft(np.einsum("...oi,...i->...o", self.sym, c))

    def adjoint(self, v):
        c = self._fft(v)
        c[~self.band] = 0
        return self._ifft(np.einsum("...oi,...o->...i", np.conj(self.sym), c))

    def norm(self, v, p):
        mag = np.sqrt(np.sum(v**2, axis=-1))
        return float(np.mean(mag**p) ** (1.0 / p))

    # parameters are grid values; f = P v, g = A v
    def to_params(self, f):
        return f.ravel()

    def pair(self, theta):
        v = theta.reshape(self.band.shape + (self.n_in,))
        return self.project(v), self.apply(v)

    def pullback(self, df, dg):
        return (self.project(df) + self.adjoint(dg)).ravel()

    def random(self, rng):
        c = np.zeros((self.m,) * self.dim + (self.n_in,), dtype=complex)
        shape = c[self.band].shape
        decay = 1.0 / (1.0 + np.sum(self.k[self.band] ** 2, axis=-1))[:, None]
        c[self.band] = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * decay
        return self.project(self._ifft(c))

    def extremal(self, p: float):
        """Smoothed conjugate-pair extremal Re/Im of ((1 + rz)/(1 - rz))^gamma, gamma near 1/p*."""
        if self.dim != 1:
            return None
        x = np.arange(self.m) * 2 * math.pi / self.m
        z = (1.0 - 2.0 / self.cutoff) * np.exp(1j * x)
        F = ((1 + z) / (1 - z)) ** (0.96 / p_star(p))
        v = F.imag if p > 2 else F.real
        return self.project(v[:, None])


class _HermiteOperator:
    """Riesz transform on one-dimensional Hermite polynomials, by quadrature.

    Parameters are Hermite coefficients.
    """

    def __init__(self, space: ModelSpace, cutoff: int, a: float, nodes: int):
        self.space = space
        x, w = np.polynomial.hermite_e.hermegauss(nodes)
        alpha = space.alpha[0]
        self.x = x / math.sqrt(alpha)
        self.weight = w / w.sum()
        self.H = hermite_table(self.x, cutoff, alpha)  # (nodes, cutoff+1)
        n = np.arange(cutoff + 1)
        lam = alpha * n
        mult = np.where(a + lam > 1e-12, np.sqrt(n * alpha) / np.sqrt(np.maximum(a + lam, 1e-300)), 0.0)
        R = np.zeros((cutoff + 1, cutoff + 1))
        R[n[1:] - 1, n[1:]] = mult[1:]
        self.R = R

    def _coef(self, v):
        return self.H.T @ (self.weight * v[:, 0])

    def project(self, v):
        return (self.H @ self._coef(v))[:, None]

    def apply(self, v):
        return (self.H @ (self.R @ self._coef(v)))[:, None]

    def adjoint(self, v):
        return (self.H @ (self.R.T @ self._coef(v)))[:, None]

    def norm(self, v, p):
        return float(np.sum(self.weight * np.abs(v[:, 0]) ** p) ** (1.0 / p))

    def to_params(self, f):
        return self._coef(f)

    def pair(self, theta):
        return (self.H @ theta)[:, None], (self.H @ (self.R @ theta))[:, None]

    def pullback(self, df, dg):
        return self.H.T @ df[:, 0] + self.R.T @ (self.H.T @ dg[:, 0])

    def random(self, rng):
        c = rng.standard_normal(self.H.shape[1]) / (1.0 + np.arange(self.H.shape[1]))
        return (self.H @ c)[:, None]

    def extremal(self, p: float):
        return None


def _duality_map(v, p):
    mag = np.sqrt(np.sum(v**2, axis=-1, keepdims=True))
    with np.errstate(divide="ignore"):
        return np.where(mag > 0, mag ** (p - 2.0), 0.0) * v


def _weights(op, v):
    w = op.weight
    return w if np.isscalar(w) else np.asarray(w).reshape((-1,) + (1,) * (v.ndim - 1))


def _polish(op, f, p, maxiter=500):
    """L-BFGS ascent of log ||A f||_p - log ||f||_p over the band-limited family."""
    from scipy.optimize import minimize

    def objective(theta):
        fv, gv = op.pair(theta)
        nf = np.sum(_weights(op, fv) * np.sqrt(np.sum(fv**2, axis=-1, keepdims=True)) ** p)
        ng = np.sum(_weights(op, gv) * np.sqrt(np.sum(gv**2, axis=-1, keepdims=True)) ** p)
        if nf <= 0 or ng <= 0:
            return 0.0, np.zeros_like(theta)
        df = _weights(op, fv) * _duality_map(fv, p) / nf
        dg = _weights(op, gv) * _duality_map(gv, p) / ng
        grad = op.pullback(np.broadcast_to(-df, fv.shape).copy(), np.broadcast_to(dg, gv.shape).copy())
        return -(math.log(ng) - math.log(nf)) / p, -grad
    res = minimize(objective, op.to_params(f), jac=True, method="L-BFGS-B",
                   options=dict(maxiter=maxiter, ftol=1e-14, gtol=1e-10))
    return math.exp(-res.fun)


def _build_operator(space: ModelSpace, operator: str, a: float, cutoff: int):
    if space.kind == "torus":
        res = 8 * (cutoff + 1)
        if operator == "riesz":
            def symbol(k):
                k2 = np.sum(k**2, axis=-1)
                inv = np.where(a + k2 > 1e-12, 1.0 / np.sqrt(np.maximum(a + k2, 1e-300)), 0.0)
                return (1j * k * inv[..., None])[..., :, None]
            return _TorusOperator(space.dim, cutoff, symbol, 1, space.dim, res)
        if operator == "S_B":
            if space.dim != 2:
                raise ConfigurationError("S_B is probed on torus2")

            def symbol(k):
                out = np.zeros(k.shape[:-1] + (2, 2))
                for idx in np.ndindex(*k.shape[:-1]):
                    out[idx] = projection_symbol(k[idx], "S_B", a)
                return out
            return _TorusOperator(2, cutoff, symbol, 2, 2, 4 * (cutoff + 1))
    if space.kind == "gauss" and space.dim == 1 and operator == "riesz":
        return _HermiteOperator(space, cutoff, a, 4 * cutoff + 40)
    raise ConfigurationError(f"no spectral probe for {operator} on {space.key}")


def _applicable_bounds(space: ModelSpace, operator: str, p: float) -> list:
    out = []
    if operator == "riesz":
        if p == 2:
            out.append(bound_value("L2", p))
        out.append(bound_value("flat", p))  # also the Gaussian-space bound
        out.append(bound_value("general", p))
        out.append(bound_value("comparison-CD", p))
    else:
        b = build_endomorphisms(2, 1)[2].op_norm
        out.append(bound_value("BA-flat", p, b_norm=b))
        out.append(bound_value("BA-general", p, b_norm=b))
    return out


def operator_norm_lower_bound(space: ModelSpace, operator: str = "riesz", p: float = 2.0,
                              a: float = 0.0, iterations: int = 200, restarts: int = 16,
                              cutoff: int = 16, seed: int = 0, polish: bool = True,
                              polish_top: int = 2) -> NormReport:
    """Largest ||Op f||_p / ||f||_p found over band-limited f.

    Each restart runs the nonlinear dual power iteration (apply, signed
    (p-1)-power, adjoint, signed (q-1)-power, band projection); the
    ``polish_top`` best end points are then refined by L-BFGS. One restart
    starts from the smoothed conjugate-function extremal when the space has one.
    """
    if not p > 1:
        raise ConfigurationError("p must exceed 1")
    op = _build_operator(space, operator, a, cutoff)
    q = p / (p - 1.0)
    rng = np.random.default_rng(seed)
    starts = [op.extremal(p)] + [None] * (restarts - 1)
    ends = []
    for s in starts:
        f = op.random(rng) if s is None else s
        f = f / op.norm(f, p)
        hist = []
        for _ in range(iterations):
            g = op.apply(f)
            hist.append(op.norm(g, p) / op.norm(f, p))
            h = op.adjoint(_duality_map(g, p))
            f = op.project(_duality_map(h, q))
            nf = op.norm(f, p)
            if nf == 0:
                break
            f = f / nf
        ends.append((max(hist), f))
    finals = [v for v, _ in ends]
    if polish and p != 2:
        # the power iteration stalls short of the band-limited maximum
        for k in np.argsort(finals)[::-1][:polish_top]:
            finals[k] = max(finals[k], _polish(op, ends[k][1], p))
    trace = list(finals)
    best = max(finals)
    converged = (best - sorted(finals)[len(finals) // 2]) <= 1e-3 * best
    bounds = _applicable_bounds(space, operator, p)
    passed = all(best <= b.value * (1 + 1e-12) for b in bounds)
    return NormReport(operator, space.key, p, best, bounds, passed, converged, trace)
