import numpy as np
import pytest
from hypothesis import given, strategies as st

from mtlab.forms import (anticommutator_defect, build_endomorphisms, exterior, hodge_oracle,
                         interior, projection_symbol, splitting_residual)
from mtlab.geometry import ConfigurationError, parse_space
from mtlab.spectral import torus_field, zero_field, zero_harmonic

wave = st.tuples(st.integers(-5, 5), st.integers(-5, 5)).filter(lambda k: k != (0, 0))


def random_form(seed, cutoff=4):
    rng = np.random.default_rng(seed)
    w = zero_field(parse_space("torus2"), cutoff, kind="form", ncomp=2)
    c = rng.standard_normal(w.coeffs.shape) + 1j * rng.standard_normal(w.coeffs.shape)
    w.coeffs[...] = 0.5 * (c + np.conj(c[:, ::-1, ::-1]))
    return zero_harmonic(w, warn=False)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_canonical_anticommutation(n):
    for i in range(n):
        for j in range(n):
            ac = interior(n, i) @ exterior(n, j) + exterior(n, j) @ interior(n, i)
            assert np.allclose(ac, np.eye(ac.shape[0]) * (i == j))
    assert anticommutator_defect(n) < 1e-14


def test_b_is_symmetric_in_its_pairing():
    b = build_endomorphisms(2, 1)[2]
    assert np.allclose(b.table, b.table.transpose(1, 0, 2, 3))
    assert b.op_norm == pytest.approx(2.0)


@given(wave, st.floats(0, 5))
def test_projection_symbols(k, a):
    dd, cd, sb = (projection_symbol(k, kind, a) for kind in ("dd*", "d*d", "S_B"))
    k2 = k[0] ** 2 + k[1] ** 2
    assert np.allclose(dd + cd, np.eye(2) * k2 / (a + k2))
    assert np.allclose(dd - cd, -sb)
    if a == 0:
        assert np.allclose(sb @ sb, np.eye(2))
        assert np.allclose(dd @ dd, dd)


@given(st.integers(0, 10**6), st.sampled_from([0.0, 0.5, 2.0]))
def test_splitting_residual_vanishes(seed, a):
    assert splitting_residual(random_form(seed), a) < 1e-12


@given(st.integers(0, 10**6))
def test_sb_involution(seed):
    w = random_form(seed)
    twice = hodge_oracle(hodge_oracle(w, "S_B", 0.0), "S_B", 0.0)
    assert np.max(np.abs(twice.coeffs - w.coeffs)) < 1e-12


def test_sb_on_model_forms():
    cx = torus_field(2, {(1, 0, 0): (1.0, 0.0)}, kind="form")
    cy = torus_field(2, {(0, 1, 0): (1.0, 0.0)}, kind="form")
    assert np.allclose(hodge_oracle(cx, "S_B", 0.0).coeffs, -cx.coeffs)
    assert np.allclose(hodge_oracle(cy, "S_B", 0.0).coeffs, cy.coeffs)
    assert np.allclose(hodge_oracle(cx, "S_B", 1.0).coeffs, -0.5 * cx.coeffs)


def test_hodge_oracle_rejects_functions():
    with pytest.raises(ConfigurationError):
        hodge_oracle(torus_field(2, {(1, 0): (1.0, 0.0)}), "S_B", 0.0)
    with pytest.raises(ConfigurationError):
        hodge_oracle(torus_field(2, {(1, 0, 0): (1.0, 0.0)}, kind="form"), "nope", 0.0)


@given(wave, st.floats(0, 5))
def test_b_norm_dominates_mode_multipliers(k, a):
    b = build_endomorphisms(2, 1)[2]
    sb = projection_symbol(k, "S_B", a)
    assert np.linalg.svd(sb, compute_uv=False).max() <= b.op_norm + 1e-12
