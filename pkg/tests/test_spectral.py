import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mtlab.geometry import parse_space
from mtlab.spectral import (analysis_grid, build_quartic_oracle, extend_gradient, gradient, heat_extend,
                            hermite_field, kernel_table, poisson_extend, quartic_eigenfunction,
                            riesz_oracle, sphere_field, synthesize, torus_field, zero_harmonic)

coef = st.floats(-2, 2, allow_nan=False)


def torus1_field(c1, s1, c2, s2, cutoff=8):
    return torus_field(1, {(1,): (c1, s1), (2,): (c2, s2)}, cutoff=cutoff)


def test_torus_riesz_of_cos():
    x = np.linspace(0, 2 * np.pi, 17)[:, None]
    f = torus_field(1, {(1,): (1.0, 0.0)})
    assert np.allclose(synthesize(riesz_oracle(f, 0.0), x)[:, 0], -np.sin(x[:, 0]), atol=1e-14)
    assert np.allclose(synthesize(riesz_oracle(f, 3.0), x)[:, 0], -0.5 * np.sin(x[:, 0]), atol=1e-14)


def test_gauss_riesz_of_h2_is_h1():
    g = parse_space("gauss1")
    x = np.linspace(-3, 3, 13)[:, None]
    r = riesz_oracle(hermite_field(g, {2: 1.0}), 0.0)
    assert np.allclose(synthesize(r, x)[:, 0], x[:, 0], atol=1e-12)


def test_sphere_riesz_of_y10():
    s = parse_space("sphere2")
    rng = np.random.default_rng(0)
    p = rng.standard_normal((10, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    # Y10 = sqrt(3) z, eigenvalue 2
    expected = math.sqrt(3) * (np.array([0, 0, 1.0]) - p[:, 2:3] * p) / math.sqrt(2)
    r = riesz_oracle(sphere_field({(1, 0): 1.0}), 0.0)
    assert np.allclose(synthesize(r, p), expected, atol=1e-12)
    assert s.kind == "sphere"


def test_quartic_eigenfunction_normalized_and_odd():
    o = build_quartic_oracle()
    f = quartic_eigenfunction(1, o)
    x, w = analysis_grid(parse_space("quartic1"), 0, o)
    v = synthesize(f, x)[:, 0]
    assert np.sum(w * v * v) == pytest.approx(1.0, abs=1e-6)
    # tails near the Dirichlet ends carry no weight and are not resolved
    core = np.abs(x[:, 0]) < 3
    assert np.allclose(v[core], -v[::-1][core], atol=1e-6)
    lam = f.eigenvalues().ravel()
    assert lam[0] == pytest.approx(0.0, abs=1e-6) and lam[1] > 0.5


@given(coef, coef, coef, coef, coef, coef, st.floats(0, 4))
def test_riesz_linear(c1, s1, c2, s2, alpha, beta, a):
    f = torus1_field(c1, s1, c2, s2)
    g = torus1_field(s2, c1, s1, c2)
    lhs = riesz_oracle(f.scale(alpha) + g.scale(beta), a).coeffs
    rhs = alpha * riesz_oracle(f, a).coeffs + beta * riesz_oracle(g, a).coeffs
    assert np.allclose(lhs, rhs, atol=1e-12)


@given(coef, coef, coef, coef, st.floats(0, 2 * math.pi), st.floats(0, 4))
def test_riesz_translation_equivariant(c1, s1, c2, s2, shift, a):
    f = torus1_field(c1, s1, c2, s2)
    k = np.arange(-8, 9)
    shifted = f.scale(1.0)
    shifted.coeffs[...] = f.coeffs * np.exp(-1j * k * shift)
    x = np.linspace(0, 2 * np.pi, 9)[:, None]
    lhs = synthesize(riesz_oracle(shifted, a), x)
    rhs = synthesize(riesz_oracle(f, a), x - shift)
    assert np.allclose(lhs, rhs, atol=1e-12)


@given(coef, coef, coef, coef, st.floats(0, 4))
def test_riesz_contraction(c1, s1, c2, s2, a):
    f = torus1_field(c1, s1, c2, s2)
    r = riesz_oracle(f, a)
    assert r.l2_norm() <= f.l2_norm() * (1 + 1e-12) + 1e-15
    if a == 0:
        assert r.l2_norm() == pytest.approx(f.l2_norm(), abs=1e-12)


@given(coef, coef, coef, coef, st.floats(0, 3), st.floats(0, 3), st.floats(0, 3))
def test_poisson_semigroup(c1, s1, c2, s2, a, y1, y2):
    f = torus1_field(c1, s1, c2, s2)
    lhs = poisson_extend(poisson_extend(f, a, y1), a, y2).coeffs
    assert np.allclose(lhs, poisson_extend(f, a, y1 + y2).coeffs, atol=1e-12)


def test_heat_semigroup_and_decay():
    g = parse_space("gauss1")
    f = hermite_field(g, {1: 1.0, 3: 2.0})
    both = heat_extend(heat_extend(f, 0.3), 0.4)
    assert np.allclose(both.coeffs, heat_extend(f, 0.7).coeffs, atol=1e-14)
    assert heat_extend(f, 1.0).coeffs[0, 3] == pytest.approx(2.0 * math.exp(-3.0))


def test_zero_harmonic_removes_mean():
    f = torus_field(1, {(0,): (2.0, 0.0), (1,): (1.0, 0.0)})
    with pytest.warns(UserWarning):
        z = zero_harmonic(f)
    assert z.coeffs[0, 16] == 0 and z.coeffs[0, 17] == f.coeffs[0, 17]


def test_gradient_matches_finite_difference():
    f = torus_field(2, {(1, 2): (0.5, -1.0), (0, 1): (1.0, 0.3)})
    p = np.array([[0.3, 1.1]])
    h = 1e-6
    fd = [(synthesize(f, p + h * e) - synthesize(f, p - h * e))[0, 0] / (2 * h) for e in np.eye(2)]
    assert np.allclose(gradient(f, p)[0], fd, atol=1e-8)


def test_kernel_table_folds_conjugate_pairs():
    kt = kernel_table(torus_field(1, {(1,): (1.0, 0.0), (2,): (0.0, 0.5)}), 0.0)
    assert len(kt.rates) == 2
    assert np.allclose(sorted(kt.rates), [1.0, 2.0])
    assert kt.min_rate == 1.0


def test_quartic_eigenfunctions_orthonormal():
    o = build_quartic_oracle()
    gram = o.eigenfunctions.T @ (o.weights[:, None] * o.eigenfunctions)
    assert np.max(np.abs(gram - np.eye(gram.shape[0]))) < 1e-8


@pytest.mark.parametrize("a", [0.0, 1.0])
def test_quartic_riesz_contraction(a):
    o = build_quartic_oracle()
    for j in (1, 2, 3):
        f = quartic_eigenfunction(j, o)
        r = riesz_oracle(f, a)
        lam = o.eigenvalues[j]
        x, w = analysis_grid(parse_space("quartic1"), 0, o)
        norm2 = float(np.sum(w * synthesize(r, x)[:, 0] ** 2))
        # ||grad phi_j||^2 = lambda_j, so the ratio is lambda / (a + lambda)
        assert norm2 == pytest.approx(lam / (a + lam), rel=1e-3)
        assert norm2 <= 1 + 1e-3


@given(coef, coef, st.floats(0, 3), st.floats(0.1, 3), st.floats(0, 2 * math.pi))
def test_extend_gradient_height_derivative(c1, s2, a, y, x):
    f = torus1_field(c1, 0.0, 0.0, s2)
    _, dy = extend_gradient(f, a, y, np.array([[x]]))
    h = 1e-4
    up = synthesize(poisson_extend(f, a, y + h), np.array([[x]]))[0, 0]
    down = synthesize(poisson_extend(f, a, y - h), np.array([[x]]))[0, 0]
    assert dy == pytest.approx((up - down) / (2 * h), abs=1e-6)
