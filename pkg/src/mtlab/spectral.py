"""Truncated eigen-expansions on the model spaces and the exact multiplier oracles.

Bases (all orthonormal in L2 of the normalized stationary measure):

* torus: complex Fourier modes exp(i k.x), |k_j| <= cutoff, stored on a
  ``(2K+1,)*d`` grid with index ``k + K``;
* gauss: products of normalized Hermite functions He_n(sqrt(alpha) x)/sqrt(n!);
* quartic: eigenfunctions of a grid discretization of -L (see
  :func:`build_quartic_oracle`);
* sphere: real spherical harmonics, index ``l*l + l + m``.

A field is either a scalar function (``kind="function"``), a 1-form given by
its components in one of the bases above (``kind="form"``; torus and gauss
only) or the differential of a scalar expansion (``kind="gradient"``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import linalg, special

from .geometry import TWO_PI, ConfigurationError, ModelSpace

FOURIER_CUTOFF = 64
HERMITE_CUTOFF = 20
SPHERE_CUTOFF = 16
QUARTIC_KEEP = 40


class ZeroModeWarning(UserWarning):
    pass


@dataclass
class EigenSolveOracle:
    x: np.ndarray
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # (n, m), orthonormal under weights
    derivatives: np.ndarray  # (n, m)
    weights: np.ndarray  # quadrature weights of the normalized measure

    def eval(self, x, deriv=False):
        table = self.derivatives if deriv else self.eigenfunctions
        x = np.asarray(x, dtype=float).reshape(-1)
        return np.stack([np.interp(x, self.x, table[:, j]) for j in range(table.shape[1])], axis=-1)


@dataclass
class SpectralField:
    space: ModelSpace
    coeffs: np.ndarray  # (ncomp, *mode_shape)
    kind: str = "function"
    oracle: EigenSolveOracle | None = None
    aliased: bool = False
    harmonic_zeroed: bool = False

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    @property
    def cutoff(self) -> int:
        s = self.coeffs.shape[1]
        if self.space.kind == "torus":
            return (s - 1) // 2
        if self.space.kind == "sphere":
            return int(round(math.sqrt(s))) - 1
        return s - 1

    def __add__(self, other):
        _check_compatible(self, other)
        return replace(self, coeffs=self.coeffs + other.coeffs, aliased=self.aliased or other.aliased)

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, c: float) -> "SpectralField":
        return replace(self, coeffs=self.coeffs * c)

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalue of the (weighted) Hodge Laplacian for every stored coefficient."""
        lam = mode_eigenvalues(self.space, self.coeffs.shape[1:], self.oracle)
        lam = np.broadcast_to(lam, self.coeffs.shape).copy()
        if self.kind == "form" and self.space.kind == "gauss":
            # Weitzenbock term Hess(phi) = A acts on component j by alpha_j
            for j in range(self.ncomp):
                lam[j] += self.space.alpha[j]
        return lam

    def l2_norm(self) -> float:
        """Norm in L2(mu), through Parseval."""
        if self.kind == "gradient":
            lam = self.eigenvalues()
            return float(math.sqrt(np.sum(lam * np.abs(self.coeffs) ** 2)))
        return float(math.sqrt(np.sum(np.abs(self.coeffs) ** 2)))


def _check_compatible(f, g):
    if f.space != g.space or f.kind != g.kind or f.coeffs.shape != g.coeffs.shape:
        raise ConfigurationError("incompatible spectral fields")


# -- eigenvalues --------------------------------------------------------------

def mode_eigenvalues(space: ModelSpace, shape, oracle=None) -> np.ndarray:
    if space.kind == "torus":
        ks = np.meshgrid(*[np.arange(s) - (s - 1) // 2 for s in shape], indexing="ij")
        return sum(k.astype(float) ** 2 for k in ks)
    if space.kind == "gauss":
        ns = np.meshgrid(*[np.arange(s) for s in shape], indexing="ij")
        return sum(a * n for a, n in zip(space.alpha, ns))
    if space.kind == "quartic":
        if oracle is None:
            raise ConfigurationError("quartic field needs its eigensolve oracle")
        return oracle.eigenvalues[: shape[0]].copy()
    L = int(round(math.sqrt(shape[0]))) - 1
    return np.array([l * (l + 1.0) for l in range(L + 1) for _ in range(2 * l + 1)])


def zero_mode_mask(space: ModelSpace, shape, oracle=None) -> np.ndarray:
    return mode_eigenvalues(space, shape, oracle) < 1e-9


# -- bases --------------------------------------------------------------------

def hermite_table(x, nmax: int, alpha: float = 1.0) -> np.ndarray:
    """Normalized Hermite functions h_0..h_nmax at x, shape (len(x), nmax+1)."""
    u = np.sqrt(alpha) * np.asarray(x, dtype=float)
    out = np.empty(u.shape + (nmax + 1,))
    out[..., 0] = 1.0
    if nmax >= 1:
        out[..., 1] = u
    for n in range(1, nmax):
        out[..., n + 1] = (u * out[..., n] - math.sqrt(n) * out[..., n - 1]) / math.sqrt(n + 1)
    return out


def hermite_derivative_table(x, nmax: int, alpha: float = 1.0) -> np.ndarray:
    h = hermite_table(x, nmax, alpha)
    out = np.zeros_like(h)
    n = np.arange(1, nmax + 1)
    out[..., 1:] = math.sqrt(alpha) * np.sqrt(n) * h[..., :-1]
    return out


def sphere_angles(p):
    p = np.asarray(p, dtype=float)
    theta = np.arccos(np.clip(p[..., 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(p[..., 1], p[..., 0]), TWO_PI)
    return theta, phi


def real_sph_harm(L: int, p) -> np.ndarray:
    """Real spherical harmonics orthonormal under the normalized area measure."""
    theta, phi = sphere_angles(p)
    cols = []
    for l in range(L + 1):
        for m in range(-l, l + 1):
            y = special.sph_harm_y(l, abs(m), theta, phi)
            if m > 0:
                v = math.sqrt(2.0) * (-1) ** m * y.real
            elif m < 0:
                v = math.sqrt(2.0) * (-1) ** m * y.imag
            else:
                v = y.real
            cols.append(v * math.sqrt(4.0 * math.pi))
    return np.stack(cols, axis=-1)


def _monomials(l: int):
    return [(i, j, l - i - j) for i in range(l + 1) for j in range(l + 1 - i)]


@lru_cache(maxsize=4)
def sphere_monomial_table(L: int):
    """Homogeneous polynomials whose restrictions to the sphere are the real harmonics.

    Returns ``(exps, coef, mode)`` with one row per monomial term.
    """
    rng = np.random.default_rng(7)
    exps, coef, mode = [], [], []
    for l in range(L + 1):
        mons = _monomials(l)
        npts = 4 * len(mons) + 16
        v = rng.standard_normal((npts, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        design = np.stack([v[:, 0] ** i * v[:, 1] ** j * v[:, 2] ** k for i, j, k in mons], axis=1)
        Y = real_sph_harm(l, v)[:, l * l:]
        sol, *_ = np.linalg.lstsq(design, Y, rcond=None)
        for col in range(2 * l + 1):
            for r, e in enumerate(mons):
                if abs(sol[r, col]) > 1e-13:
                    exps.append(e)
                    coef.append(sol[r, col])
                    mode.append(l * l + col)
    return np.array(exps, dtype=np.int64).reshape(-1, 3), np.array(coef), np.array(mode, dtype=np.int64)


def _sphere_poly_eval(p, L, deriv):
    """Values (deriv=False) or ambient gradients (deriv=True) of all harmonics via monomials."""
    exps, coef, mode = sphere_monomial_table(L)
    p = np.atleast_2d(np.asarray(p, dtype=float))
    nmode = (L + 1) ** 2
    if not deriv:
        out = np.zeros((p.shape[0], nmode))
        terms = coef * np.prod(p[:, None, :] ** exps[None], axis=-1)
        np.add.at(out.T, mode, terms.T)
        return out
    out = np.zeros((p.shape[0], nmode, 3))
    for ax in range(3):
        e = exps.copy()
        factor = e[:, ax].astype(float)
        e[:, ax] = np.maximum(e[:, ax] - 1, 0)
        terms = coef * factor * np.prod(p[:, None, :] ** e[None], axis=-1)
        np.add.at(out[:, :, ax].T, mode, terms.T)
    # tangential projection
    radial = np.einsum("nmk,nk->nm", out, p)
    return out - radial[..., None] * p[:, None, :]


# -- analysis / synthesis -----------------------------------------------------

def analysis_grid(space: ModelSpace, cutoff: int, oracle=None):
    """Quadrature nodes (n, D) and weights (n,) exact for band-limited products."""
    if space.kind == "torus":
        m = 4 * cutoff + 4
        g = np.arange(m) * TWO_PI / m
        mesh = np.meshgrid(*([g] * space.dim), indexing="ij")
        pts = np.stack([c.ravel() for c in mesh], axis=-1)
        return pts, np.full(len(pts), 1.0 / len(pts))
    if space.kind == "gauss":
        q = 2 * cutoff + 8
        nodes, w = np.polynomial.hermite_e.hermegauss(q)
        w = w / w.sum()
        axes = [nodes / math.sqrt(a) for a in space.alpha]
        mesh = np.meshgrid(*axes, indexing="ij")
        wm = np.meshgrid(*([w] * space.dim), indexing="ij")
        pts = np.stack([c.ravel() for c in mesh], axis=-1)
        return pts, np.prod(np.stack([c.ravel() for c in wm]), axis=0)
    if space.kind == "quartic":
        return oracle.x[:, None], oracle.weights
    q = cutoff + 2
    zs, wz = np.polynomial.legendre.leggauss(q)
    nphi = 2 * cutoff + 4
    phis = np.arange(nphi) * TWO_PI / nphi
    Z, P = np.meshgrid(zs, phis, indexing="ij")
    W = np.meshgrid(wz, np.ones(nphi), indexing="ij")[0] / (2.0 * nphi)
    r = np.sqrt(1 - Z**2)
    pts = np.stack([(r * np.cos(P)).ravel(), (r * np.sin(P)).ravel(), Z.ravel()], axis=-1)
    return pts, W.ravel()


def basis_values(space: ModelSpace, pts, cutoff: int, oracle=None) -> np.ndarray:
    """Real or complex basis functions at pts, flattened over the mode grid."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if space.kind == "torus":
        ks = np.arange(-cutoff, cutoff + 1)
        per_axis = [np.exp(1j * np.outer(pts[:, j], ks)) for j in range(space.dim)]
        if space.dim == 1:
            return per_axis[0]
        return (per_axis[0][:, :, None] * per_axis[1][:, None, :]).reshape(len(pts), -1)
    if space.kind == "gauss":
        per_axis = [hermite_table(pts[:, j], cutoff, space.alpha[j]) for j in range(space.dim)]
        if space.dim == 1:
            return per_axis[0]
        return (per_axis[0][:, :, None] * per_axis[1][:, None, :]).reshape(len(pts), -1)
    if space.kind == "quartic":
        return oracle.eval(pts[:, 0])[:, : cutoff + 1]
    return _sphere_poly_eval(pts, cutoff, deriv=False)


def basis_gradients(space: ModelSpace, pts, cutoff: int, oracle=None) -> np.ndarray:
    """Gradients of the basis, shape (npts, nmodes, D) in ambient/chart coordinates."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if space.kind == "torus":
        ks = np.arange(-cutoff, cutoff + 1)
        e = [np.exp(1j * np.outer(pts[:, j], ks)) for j in range(space.dim)]
        if space.dim == 1:
            return (1j * ks * e[0])[..., None]
        g0 = (1j * ks[None, :, None] * e[0][:, :, None]) * e[1][:, None, :]
        g1 = e[0][:, :, None] * (1j * ks[None, None, :] * e[1][:, None, :])
        n = len(pts)
        return np.stack([g0.reshape(n, -1), g1.reshape(n, -1)], axis=-1)
    if space.kind == "gauss":
        h = [hermite_table(pts[:, j], cutoff, space.alpha[j]) for j in range(space.dim)]
        dh = [hermite_derivative_table(pts[:, j], cutoff, space.alpha[j]) for j in range(space.dim)]
        if space.dim == 1:
            return dh[0][..., None]
        n = len(pts)
        g0 = (dh[0][:, :, None] * h[1][:, None, :]).reshape(n, -1)
        g1 = (h[0][:, :, None] * dh[1][:, None, :]).reshape(n, -1)
        return np.stack([g0, g1], axis=-1)
    if space.kind == "quartic":
        return oracle.eval(pts[:, 0], deriv=True)[:, : cutoff + 1, None]
    return _sphere_poly_eval(pts, cutoff, deriv=True)


def default_cutoff(space: ModelSpace) -> int:
    return {"torus": FOURIER_CUTOFF, "gauss": HERMITE_CUTOFF, "quartic": QUARTIC_KEEP - 1,
            "sphere": SPHERE_CUTOFF}[space.kind]


def analyze(space: ModelSpace, source, cutoff: int | None = None, kind: str = "function",
            oracle: EigenSolveOracle | None = None) -> SpectralField:
    """Project a callable (points -> values) onto the truncated basis.

    ``source`` may also be an array of samples on :func:`analysis_grid`.
    For ``kind="form"`` the callable returns one column per component.
    """
    if space.kind == "quartic" and oracle is None:
        oracle = default_quartic_oracle()
    if cutoff is None:
        cutoff = default_cutoff(space) if space.kind != "torus" else 16
    if space.kind == "quartic":
        cutoff = min(cutoff, oracle.eigenvalues.size - 1)
    pts, w = analysis_grid(space, cutoff, oracle)
    vals = source(pts) if callable(source) else np.asarray(source)
    vals = np.asarray(vals)
    if vals.ndim == 1:
        vals = vals[:, None]
    basis = basis_values(space, pts, cutoff, oracle)
    coeffs = (np.conj(basis).T * w) @ vals  # (nmodes, ncomp)
    shape = _mode_shape(space, cutoff)
    coeffs = coeffs.T.reshape((vals.shape[1],) + shape)
    if space.kind != "torus":
        coeffs = coeffs.real
    else:
        coeffs = np.where(np.abs(coeffs) < 1e-14, 0.0, coeffs)
    total = float(np.sum(np.abs(vals) ** 2 * w[:, None]))
    captured = float(np.sum(np.abs(coeffs) ** 2))
    edge = float(np.sum(np.abs(coeffs[_edge_index(space, shape)]) ** 2))
    aliased = total > 0 and (edge + max(total - captured, 0.0)) > 1e-6 * total
    f = SpectralField(space, coeffs, kind=kind, oracle=oracle, aliased=aliased)
    if aliased:
        warnings.warn("field is not band-limited below the cutoff", stacklevel=2)
    return f


def _mode_shape(space, cutoff):
    if space.kind == "torus":
        return (2 * cutoff + 1,) * space.dim
    if space.kind == "gauss":
        return (cutoff + 1,) * space.dim
    if space.kind == "quartic":
        return (cutoff + 1,)
    return ((cutoff + 1) ** 2,)


def _edge_index(space, shape):
    """Index selecting the outermost shell of modes (for the aliasing check)."""
    if space.kind == "torus":
        K = (shape[0] - 1) // 2
        ks = np.meshgrid(*[np.arange(s) - K for s in shape], indexing="ij")
        mask = np.max(np.abs(np.stack(ks)), axis=0) == K
    elif space.kind == "gauss":
        ns = np.meshgrid(*[np.arange(s) for s in shape], indexing="ij")
        mask = np.max(np.stack(ns), axis=0) == shape[0] - 1
    elif space.kind == "quartic":
        mask = np.zeros(shape, bool)
        mask[-1] = True
    else:
        L = int(round(math.sqrt(shape[0]))) - 1
        mask = np.zeros(shape, bool)
        mask[L * L:] = True
    return (slice(None),) + (mask,)


def zero_field(space: ModelSpace, cutoff: int | None = None, kind="function", ncomp=1, oracle=None):
    if space.kind == "quartic" and oracle is None:
        oracle = default_quartic_oracle()
    cutoff = default_cutoff(space) if cutoff is None else cutoff
    dtype = complex if space.kind == "torus" else float
    return SpectralField(space, np.zeros((ncomp,) + _mode_shape(space, cutoff), dtype=dtype),
                         kind=kind, oracle=oracle)


def synthesize(f: SpectralField, pts) -> np.ndarray:
    """Values at pts: (n, ncomp) for functions/forms, (n, D) for gradient fields."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    flat = f.coeffs.reshape(f.ncomp, -1)
    if f.kind == "gradient":
        g = basis_gradients(f.space, pts, f.cutoff, f.oracle)
        out = np.einsum("nmd,m->nd", g, flat[0])
    else:
        out = basis_values(f.space, pts, f.cutoff, f.oracle) @ flat.T
    return out.real if np.iscomplexobj(out) else out


def gradient(f: SpectralField, pts) -> np.ndarray:
    """Gradient of a scalar function field at pts, shape (n, D)."""
    if f.kind != "function":
        raise ConfigurationError("gradient() expects a function field")
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    g = basis_gradients(f.space, pts, f.cutoff, f.oracle)
    out = np.einsum("nmd,m->nd", g, f.coeffs.reshape(-1))
    return out.real if np.iscomplexobj(out) else out


# -- multipliers ---------------------------------------------------------------

def apply_multiplier(f: SpectralField, mult) -> SpectralField:
    return replace(f, coeffs=f.coeffs * mult)


def poisson_extend(f: SpectralField, a: float, y: float) -> SpectralField:
    """Coefficientwise exp(-y sqrt(a + lambda))."""
    if a < 0 or y < 0:
        raise ConfigurationError("poisson_extend needs a >= 0 and y >= 0")
    lam = f.eigenvalues()
    return apply_multiplier(f, np.exp(-y * np.sqrt(a + lam)))


def heat_extend(f: SpectralField, t: float) -> SpectralField:
    """Coefficientwise exp(-t lambda) on the spectral clock."""
    if t < 0:
        raise ConfigurationError("heat_extend needs t >= 0")
    return apply_multiplier(f, np.exp(-t * f.eigenvalues()))


def zero_harmonic(f: SpectralField, warn: bool = True) -> SpectralField:
    mask = zero_mode_mask(f.space, f.coeffs.shape[1:], f.oracle)
    coeffs = f.coeffs.copy()
    if np.any(np.abs(coeffs[:, mask]) > 0):
        if warn:
            warnings.warn("zero/harmonic modes removed before inverting", ZeroModeWarning, stacklevel=3)
        coeffs[:, mask] = 0
    return replace(f, coeffs=coeffs, harmonic_zeroed=True)


def extend_gradient(f: SpectralField, a: float, y: float, point):
    """(grad Q_a f, d/dy Q_a f) at (point, y) for a scalar field f."""
    q = poisson_extend(f, a, y)
    lam = f.eigenvalues()
    dq = apply_multiplier(q, -np.sqrt(a + lam))
    grad = gradient(q, point)[0]
    dy = float(synthesize(dq, point)[0, 0])
    return grad, dy


def riesz_oracle(f: SpectralField, a: float) -> SpectralField:
    """grad (a - L)^(-1/2) f as a 1-form field."""
    if f.kind != "function":
        raise ConfigurationError("riesz_oracle expects a function field")
    if a < 0:
        raise ConfigurationError("a must be nonnegative")
    if a == 0:
        f = zero_harmonic(f)
    lam = f.eigenvalues()
    with np.errstate(divide="ignore"):
        inv = np.where(a + lam > 1e-12, 1.0 / np.sqrt(np.maximum(a + lam, 1e-300)), 0.0)
    space = f.space
    if space.kind == "torus":
        K = f.cutoff
        ks = np.meshgrid(*[np.arange(-K, K + 1)] * space.dim, indexing="ij")
        comps = [f.coeffs[0] * 1j * k * inv[0] for k in ks]
        return SpectralField(space, np.stack(comps), kind="form")
    if space.kind == "gauss":
        c = f.coeffs[0] * inv[0]
        comps = []
        for j, alpha in enumerate(space.alpha):
            # d/dx_j h_n = sqrt(n alpha) h_{n-1}
            n = np.arange(c.shape[j])
            shape = [1] * space.dim
            shape[j] = -1
            scaled = c * np.sqrt(n * alpha).reshape(shape)
            comps.append(np.roll(scaled, -1, axis=j))
            idx = [slice(None)] * space.dim
            idx[j] = -1
            comps[-1][tuple(idx)] = 0.0
        return SpectralField(space, np.stack(comps), kind="form")
    return SpectralField(space, f.coeffs * inv, kind="gradient", oracle=f.oracle)


# -- quartic grid oracle -------------------------------------------------------

def build_quartic_oracle(R: float = 6.0, n: int = 2000, keep: int = QUARTIC_KEEP,
                         potential=None) -> EigenSolveOracle:
    """Lowest eigenpairs of -L = -d2/dx2 + phi'(x) d/dx on [-R, R], Dirichlet ends.

    The operator is symmetrized in L2(mu) by the similarity exp(-phi/2).
    ``potential`` defaults to x^4/4.
    """
    if R < 6 or n < 1000:
        raise ConfigurationError("quartic oracle needs R >= 6 and n >= 1000")
    phi = potential if potential is not None else (lambda x: 0.25 * x**4)
    h = 2.0 * R / (n + 1)
    x = -R + h * np.arange(1, n + 1)
    ph = phi(x)
    mid = phi(-R + h * (np.arange(n + 1) + 0.5))  # midpoints i-1/2 for i = 1..n+1
    diag = (np.exp(ph - mid[:-1]) + np.exp(ph - mid[1:])) / h**2
    off = -np.exp(0.5 * (ph[:-1] + ph[1:]) - mid[1:-1]) / h**2
    try:
        vals, vecs = linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, keep - 1))
    except linalg.LinAlgError as exc:
        raise RuntimeError("quartic eigensolve failed") from exc
    w = np.exp(-(ph - ph.min()))
    Z = w.sum()
    weights = w / Z
    funcs = vecs * np.exp(0.5 * (ph - ph.min()))[:, None] * math.sqrt(Z)
    for j in range(keep):
        # fix sign: positive slope (or value) at the origin side
        i = np.argmax(np.abs(funcs[:, j]) * np.sqrt(weights))
        s = np.sign(funcs[i, j]) if j % 2 == 0 else np.sign(funcs[i, j] * x[i])
        funcs[:, j] *= s if s != 0 else 1.0
    funcs[:, 0] = np.abs(funcs[:, 0])
    derivs = np.gradient(funcs, h, axis=0)
    return EigenSolveOracle(x=x, eigenvalues=vals, eigenfunctions=funcs, derivatives=derivs,
                            weights=weights)


@lru_cache(maxsize=1)
def default_quartic_oracle() -> EigenSolveOracle:
    return build_quartic_oracle()


def quartic_eigenfunction(j: int, oracle=None) -> SpectralField:
    """The j-th eigenfunction of -L on the quartic space as a field."""
    oracle = oracle or default_quartic_oracle()
    space = ModelSpace("quartic", 1)
    f = zero_field(space, oracle=oracle)
    f.coeffs[0, j] = 1.0
    return f


# -- kernel tables -------------------------------------------------------------

@dataclass
class KernelTable:
    """Flat per-term description of a scalar field for the compiled kernels.

    Term t contributes ``tf[t,0] * basis_t(x)`` (torus terms add
    ``tf[t,1] * sin``) to mode ``ti[t,3]`` whose Poisson decay rate is
    ``rates[mode]`` (``rates0`` is the a = 0 rate). Quartic terms index rows
    of ``grid`` (eigenfunction derivatives) and ``grid2`` (values).
    """

    ti: np.ndarray
    tf: np.ndarray
    rates: np.ndarray
    rates0: np.ndarray
    grid: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))
    grid2: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))
    grid_x0: float = 0.0
    grid_dx: float = 1.0
    min_rate: float = math.inf


def kernel_table(f: SpectralField, a: float) -> KernelTable:
    if f.kind != "function" or f.ncomp != 1:
        raise ConfigurationError("kernel tables describe scalar function fields")
    if f.space.kind == "torus":
        flipped = np.conj(f.coeffs[0][(slice(None, None, -1),) * f.space.dim])
        if not np.allclose(f.coeffs[0], flipped, atol=1e-12):
            raise ConfigurationError("kernel tables need a real-valued field")
    space = f.space
    lam_all = f.eigenvalues()[0]
    c = f.coeffs[0]
    nz = np.argwhere(np.abs(c) > 1e-15)
    ti, tf, rates, rates0 = [], [], [], []
    grid = np.zeros((1, 1))
    grid2 = np.zeros((1, 1))
    x0, dx = 0.0, 1.0
    if space.kind == "sphere":
        exps, coef, mode = sphere_monomial_table(f.cutoff)
        used = {}
        for (m,) in nz:
            used[int(m)] = len(rates)
            rates.append(math.sqrt(a + lam_all[m]))
            rates0.append(math.sqrt(lam_all[m]))
        for e, cf, m in zip(exps, coef, mode):
            if int(m) in used:
                ti.append([e[0], e[1], e[2], used[int(m)]])
                tf.append([cf * c[m], 0.0, 0.0, 0.0])
    elif space.kind == "quartic":
        rows = []
        for (m,) in nz:
            rows.append(m)
            ti.append([len(rows) - 1, 0, 0, len(rows) - 1])
            tf.append([c[m], 0.0, 0.0, 0.0])
            rates.append(math.sqrt(a + lam_all[m]))
            rates0.append(math.sqrt(lam_all[m]))
        o = f.oracle
        grid = np.ascontiguousarray(o.derivatives[:, rows].T) if rows else np.zeros((1, 1))
        grid2 = np.ascontiguousarray(o.eigenfunctions[:, rows].T) if rows else grid2
        x0, dx = float(o.x[0]), float(o.x[1] - o.x[0])
    else:
        for idx in nz:
            idx = tuple(int(i) for i in idx)
            lam = lam_all[idx]
            if space.kind == "torus":
                K = f.cutoff
                k = [i - K for i in idx] + [0] * (2 - len(idx))
                # real field: the -k partner is folded into the +k term
                if lam == 0 or k[0] < 0 or (k[0] == 0 and k[1] < 0):
                    continue
                val = c[idx]
                ti.append([k[0], k[1], 0, len(rates)])
                tf.append([2.0 * val.real, -2.0 * val.imag, 0.0, 0.0])
            else:
                n = list(idx) + [0] * (2 - len(idx))
                if lam == 0:
                    continue
                ti.append([n[0], n[1], 0, len(rates)])
                tf.append([c[idx], 0.0, 0.0, 0.0])
            rates.append(math.sqrt(a + lam))
            rates0.append(math.sqrt(lam))
    ti = np.array(ti, dtype=np.int64).reshape(-1, 4)
    tf = np.array(tf, dtype=float).reshape(-1, 4)
    rates = np.array(rates, dtype=float)
    rates0 = np.array(rates0, dtype=float)
    positive = rates0[rates0 > 0]
    min_rate = float(np.sqrt(a + positive.min() ** 2)) if positive.size else math.inf
    return KernelTable(ti, tf, rates, rates0, np.ascontiguousarray(grid, dtype=float),
                       np.ascontiguousarray(grid2, dtype=float), x0, dx, min_rate)


def form_kernel_table(w: SpectralField):
    """Torus 1-form as (k1, k2, component) terms with cos/sin coefficients and eigenvalues."""
    if w.space.kind != "torus" or w.kind != "form":
        raise ConfigurationError("form tables are defined for torus 1-forms")
    K = w.cutoff
    lam_all = w.eigenvalues()
    ti, tf, lam = [], [], []
    for idx in np.argwhere(np.abs(w.coeffs) > 1e-15):
        comp, *kidx = (int(i) for i in idx)
        k = [i - K for i in kidx] + [0] * (2 - len(kidx))
        val = w.coeffs[tuple(idx)]
        ti.append([k[0], k[1], comp, len(lam)])
        tf.append([val.real, -val.imag, 0.0, 0.0])
        lam.append(lam_all[tuple(idx)])
    return (np.array(ti, dtype=np.int64).reshape(-1, 4), np.array(tf, dtype=float).reshape(-1, 4),
            np.array(lam, dtype=float))


# -- convenience constructors ----------------------------------------------------

def torus_field(dim: int, terms, cutoff: int = 16, kind: str = "function") -> SpectralField:
    """Real trigonometric field from ``{(k..., comp): (cos_coef, sin_coef)}``.

    For functions ``comp`` may be omitted.
    """
    space = ModelSpace("torus", dim)
    ncomp = dim if kind == "form" else 1
    coeffs = np.zeros((ncomp,) + (2 * cutoff + 1,) * dim, dtype=complex)
    for key, (cc, ss) in terms.items():
        key = tuple(key)
        if len(key) == dim:
            key = key + (0,)
        k, comp = np.array(key[:dim]), key[dim]
        # cc cos(kx) + ss sin(kx) = c_k e^{ikx} + c_{-k} e^{-ikx}
        if not np.any(k):
            coeffs[(comp,) + tuple(k + cutoff)] += cc
            continue
        coeffs[(comp,) + tuple(k + cutoff)] += 0.5 * (cc - 1j * ss)
        coeffs[(comp,) + tuple(-k + cutoff)] += 0.5 * (cc + 1j * ss)
    return SpectralField(space, coeffs, kind=kind)


def hermite_field(space: ModelSpace, terms, cutoff: int = HERMITE_CUTOFF) -> SpectralField:
    """Field from ``{degree or (n1, n2): coefficient}``."""
    f = zero_field(space, cutoff)
    for key, v in terms.items():
        key = (key,) if isinstance(key, (int, np.integer)) else tuple(key)
        f.coeffs[(0,) + key] += v
    return f


def sphere_field(terms, cutoff: int | None = None) -> SpectralField:
    """Field from ``{(l, m): coefficient}`` on real harmonics.

    The cutoff defaults to the highest degree present.
    """
    if cutoff is None:
        cutoff = max([l for l, _ in terms] + [1])
    f = zero_field(ModelSpace("sphere", 2), cutoff)
    for (l, m), v in terms.items():
        f.coeffs[0, l * l + l + m] += v
    return f
