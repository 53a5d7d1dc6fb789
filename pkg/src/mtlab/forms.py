"""Exterior-algebra endomorphisms on forms and the flat Hodge-projection oracles."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .geometry import ConfigurationError
from .spectral import SpectralField, zero_harmonic

PAIRINGS = ("increment-first", "derivative-first")


def _basis(n: int, k: int | None = None):
    sets = [s for r in range(n + 1) for s in itertools.combinations(range(n), r)]
    return sets if k is None else [s for s in sets if len(s) == k]


def interior(n: int, i: int) -> np.ndarray:
    """Matrix of int_{e_i} on the full exterior algebra of R^n."""
    basis = _basis(n)
    index = {s: r for r, s in enumerate(basis)}
    out = np.zeros((len(basis), len(basis)))
    for col, s in enumerate(basis):
        if i in s:
            pos = s.index(i)
            rest = s[:pos] + s[pos + 1:]
            out[index[rest], col] = (-1) ** pos
    return out


def exterior(n: int, j: int) -> np.ndarray:
    """Matrix of e_j wedge (the adjoint of int_{e_j})."""
    return interior(n, j).T.copy()


@dataclass(frozen=True)
class FormEndomorphism:
    """Family of operators on k-forms indexed by (i, j).

    ``table[i, j]`` is a (dim Lambda^k, dim Lambda^k) matrix. In a payoff the
    index i pairs with the path increment and j with the derivative direction
    (``pairing="increment-first"``); ``"derivative-first"`` swaps them.
    """

    name: str
    n: int
    k: int
    table: np.ndarray

    @property
    def op_norm(self) -> float:
        return block_norm(self.table)

    def contract(self, grad, dx, pairing: str = "increment-first") -> np.ndarray:
        """sum_{i,j,l} table[i,j,:,l] grad[j,l] dx[i]  (grad[j,l] = d_j omega_l)."""
        if pairing not in PAIRINGS:
            raise ConfigurationError(f"unknown pairing {pairing!r}")
        t = self.table if pairing == "increment-first" else self.table.transpose(1, 0, 2, 3)
        return np.einsum("ijml,jl,i->m", t, grad, dx)


def block_norm(table: np.ndarray) -> float:
    """Operator norm of the block matrix [table[i, j]]."""
    n, _, r, c = table.shape
    big = table.transpose(0, 2, 1, 3).reshape(n * r, n * c)
    return float(np.linalg.norm(big, 2))


def build_endomorphisms(n: int, k: int):
    """(A1, A2, B) with A1 = (a_i a_j*), A2 = (a_i* a_j), B = A1 - A2 on k-forms."""
    if n not in (1, 2) or k not in (0, 1):
        raise ConfigurationError("endomorphisms are built for n in {1,2}, k in {0,1}")
    full = _basis(n)
    rows = [r for r, s in enumerate(full) if len(s) == k]
    a = [interior(n, i) for i in range(n)]
    astar = [exterior(n, i) for i in range(n)]
    dim = len(rows)
    t1 = np.zeros((n, n, dim, dim))
    t2 = np.zeros((n, n, dim, dim))
    for i in range(n):
        for j in range(n):
            t1[i, j] = (a[i] @ astar[j])[np.ix_(rows, rows)]
            t2[i, j] = (astar[i] @ a[j])[np.ix_(rows, rows)]
    return (FormEndomorphism("A1", n, k, t1), FormEndomorphism("A2", n, k, t2),
            FormEndomorphism("B", n, k, t1 - t2))


def anticommutator_defect(n: int) -> float:
    """max over i, j of |a_i a_j* + a_j* a_i - delta_ij Id| on the full algebra."""
    worst = 0.0
    for i in range(n):
        for j in range(n):
            m = interior(n, i) @ exterior(n, j) + exterior(n, j) @ interior(n, i)
            worst = max(worst, float(np.abs(m - (i == j) * np.eye(m.shape[0])).max()))
    return worst


# -- Hodge oracles on the flat torus ---------------------------------------------------

HODGE_KINDS = ("dd*", "d*d", "S_B")


def _wavevectors(w: SpectralField):
    K = w.cutoff
    ks = np.meshgrid(*[np.arange(-K, K + 1)] * w.space.dim, indexing="ij")
    return np.stack(ks).astype(float)


def _require_torus_form(w):
    if w.space.kind != "torus" or w.kind != "form":
        raise ConfigurationError("Hodge oracles act on torus 1-forms")


def projection_symbol(k, kind: str, a: float) -> np.ndarray:
    """Per-mode 2x2 (or 1x1) multiplier of the Hodge oracle at wavevector k."""
    k = np.asarray(k, dtype=float)
    k2 = float(k @ k)
    if k2 == 0:
        return np.zeros((k.size, k.size))
    exact = np.outer(k, k) / k2
    scale = k2 / (a + k2)
    if kind == "dd*":
        return exact * scale
    if kind == "d*d":
        return (np.eye(k.size) - exact) * scale
    if kind == "S_B":
        return (np.eye(k.size) - 2 * exact) * scale
    raise ConfigurationError(f"unknown Hodge kind {kind!r}")


def hodge_oracle(w: SpectralField, kind: str, a: float) -> SpectralField:
    _require_torus_form(w)
    if kind not in HODGE_KINDS:
        raise ConfigurationError(f"unknown Hodge kind {kind!r}")
    if a < 0:
        raise ConfigurationError("a must be nonnegative")
    if a == 0:
        w = zero_harmonic(w)
    k = _wavevectors(w)
    k2 = np.sum(k**2, axis=0)
    safe = np.where(k2 > 0, k2, 1.0)
    kdotw = np.sum(k * w.coeffs, axis=0)
    exact = k * kdotw / safe
    scale = np.where(k2 > 0, k2 / (a + safe), 0.0)
    if kind == "dd*":
        out = exact
    elif kind == "d*d":
        out = w.coeffs - exact
    else:
        out = w.coeffs - 2 * exact
    return replace(w, coeffs=out * scale)


def _resolvent(w, a):
    k2 = np.sum(_wavevectors(w) ** 2, axis=0)
    inv = np.where(a + k2 > 0, 1.0 / np.where(a + k2 > 0, a + k2, 1.0), 0.0)
    return w.coeffs * inv, k2


def splitting_residual(w: SpectralField, a: float) -> float:
    """|LHS - RHS| of the L2 splitting of Box (a + Box)^-1 into exact and coexact parts.

    The two sides are assembled from the differentials themselves (codifferential
    then d, d then codifferential) rather than from projection symbols.
    """
    _require_torus_form(w)
    if w.space.dim != 2:
        raise ConfigurationError("splitting_residual is defined on torus2 1-forms")
    if a == 0:
        w = zero_harmonic(w, warn=False)
    u, k2 = _resolvent(w, a)
    k = _wavevectors(w)
    # d* u = -div u  ->  -i k.u ; d(d* u) -> i k (-i k.u) = k (k.u)
    codiff = -1j * np.sum(k * u, axis=0)
    dd_star = 1j * k * codiff
    # d u = (d1 u2 - d2 u1) dx^dy ; d* of a 2-form c dx^dy = (d2 c, -d1 c)
    curl = 1j * (k[0] * u[1] - k[1] * u[0])
    d_star_d = np.stack([1j * k[1] * curl, -1j * k[0] * curl])
    box = k2 * u
    lhs = np.sum(np.abs(dd_star) ** 2) + np.sum(np.abs(d_star_d) ** 2)
    rhs = np.sum(np.abs(box) ** 2)
    if np.sqrt(rhs) > np.sqrt(np.sum(np.abs(w.coeffs) ** 2)) * (1 + 1e-12) + 1e-300:
        raise AssertionError("Box (a + Box)^-1 failed to contract")
    return float(abs(lhs - rhs))
