import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mtlab.forms import hodge_oracle
from mtlab.geometry import ConfigurationError, parse_space
from mtlab.pathsim import PathConfig, simulate_background_radiation
from mtlab.representation import (BinGrid, IntervalProfile, RieszSettings, ba_horizon_oracle,
                                  condition_on_exit, condition_payoffs, default_grid,
                                  littlewood_paley_check, reindexed_forward_sum,
                                  riesz_forward_payoff, riesz_mc, riesz_reversed_payoff)
from mtlab.spectral import sphere_field, torus_field


def finished_record(space, index, y=0.2):
    rec = simulate_background_radiation(PathConfig(space, y=y, max_steps=20000, path_index=index))
    assert not rec.censored
    return rec


@pytest.mark.parametrize("space,field", [
    ("torus1", torus_field(1, {(1,): (1.0, 0.0)})),
    ("sphere2", sphere_field({(1, 0): 1.0, (2, 1): 0.5})),
])
@pytest.mark.parametrize("a", [0.0, 2.0])
def test_payoff_forms_agree_on_a_path(space, field, a):
    for index in range(3):
        rec = finished_record(space, index)
        c = riesz_forward_payoff(rec, field, a, "corrected").vector
        u = riesz_forward_payoff(rec, field, a, "uncorrected").vector
        r = reindexed_forward_sum(rec, field, a)
        assert np.allclose(c, u, atol=1e-12)
        assert np.allclose(c, r, atol=1e-10)


def test_reversed_payoff_close_to_forward_for_small_steps():
    f = torus_field(1, {(1,): (1.0, 0.0)})
    rec = finished_record("torus1", 4, y=0.5)
    fwd = riesz_forward_payoff(rec, f, 0.0).vector
    rev = riesz_reversed_payoff(rec, f, 0.0).vector
    # pathwise difference is a discretisation error, not an identity
    assert np.all(np.abs(fwd - rev) < 0.2)


def test_censored_record_gives_no_vector():
    rec = simulate_background_radiation(PathConfig("torus1", y=5.0, max_steps=10))
    p = riesz_forward_payoff(rec, torus_field(1, {(1,): (1.0, 0.0)}), 0.0)
    assert p.censored and p.vector is None
    with pytest.raises(ConfigurationError):
        riesz_forward_payoff(rec, torus_field(1, {(1,): (1.0, 0.0)}), 0.0, "sideways")


@pytest.mark.parametrize("key", ["torus1", "torus2", "gauss1", "quartic1", "sphere2"])
def test_bin_centers_index_round_trip(key):
    g = default_grid(parse_space(key), 8 if key != "sphere2" else None)
    idx = g.index(g.to_points(g.centers))
    assert np.array_equal(idx, np.arange(g.nbins))


def test_points_outside_grid_are_dropped():
    g = default_grid(parse_space("gauss1"), 4)
    assert list(g.index(np.array([[-5.0], [0.1], [4.0], [9.0]]))) == [-1, 2, 3, -1]


@given(arrays(float, (60, 2), elements=st.floats(-10, 10)),
       st.lists(st.integers(0, 3), min_size=60, max_size=60), st.floats(-3, 3))
def test_condition_on_exit_matches_groupby(vectors, bins, outer):
    g = BinGrid(parse_space("torus1"), (4,), (0.0,), (4.0,))
    pts = np.array(bins, dtype=float)[:, None] + 0.5
    est = condition_on_exit(pts, vectors, g, outer, floor=2)
    for b in range(4):
        sel = outer * vectors[np.array(bins) == b]
        assert est.count[b] == len(sel)
        if len(sel):
            assert np.allclose(est.mean[b], sel.mean(axis=0), atol=1e-9)
        if len(sel) > 1:
            se = sel.std(axis=0, ddof=1) / math.sqrt(len(sel))
            assert np.allclose(est.stderr[b], se, atol=1e-9)
        else:
            assert np.all(np.isnan(est.stderr[b]))
    assert np.array_equal(est.mask, est.count >= 2)


def test_condition_payoffs_counts_censored():
    f = torus_field(1, {(1,): (1.0, 0.0)})
    recs = [finished_record("torus1", i) for i in range(3)]
    recs.append(simulate_background_radiation(PathConfig("torus1", y=5.0, max_steps=5)))
    est = condition_payoffs([riesz_forward_payoff(r, f, 0.0) for r in recs], default_grid(recs[0].space))
    assert est.censored == 1 and est.count.sum() == 3


def test_exact_green_values():
    g = IntervalProfile(0.0, 1.0)
    assert g.exact_green(2.0) == pytest.approx(1.0)
    assert g.exact_green(0.5) == pytest.approx(0.75)
    assert IntervalProfile(0.0, 1.0, 2.0).exact_green(0.5) == pytest.approx(1.5)
    assert littlewood_paley_check(None, 1.0, 10) == (0.0, 0.0, 0.0)
    with pytest.raises(ConfigurationError):
        littlewood_paley_check(IntervalProfile(-1.0, 1.0), 1.0, 10)


def test_ba_horizon_oracle_scaling():
    w = torus_field(2, {(1, 0, 0): (1.0, 0.0), (2, 1, 1): (0.0, 1.0)}, kind="form")
    T, a = 4.0, 0.5
    h = ba_horizon_oracle(w, a, T)
    full = hodge_oracle(w, "S_B", a)
    lam = w.eigenvalues()
    assert np.allclose(h.coeffs, full.coeffs * (1 - np.exp(-T * (a + lam))))
    assert np.allclose(ba_horizon_oracle(w, a, 200.0).coeffs, full.coeffs)


def test_riesz_mc_independent_of_workers():
    s = parse_space("torus1")
    f = torus_field(1, {(1,): (1.0, 0.0)})
    st_ = RieszSettings(kappa=0.01, hmax=0.05)
    one = riesz_mc(s, f, 0.0, 2.0, 300, seed=3, settings=st_, workers=1, block=100)
    two = riesz_mc(s, f, 0.0, 2.0, 300, seed=3, settings=st_, workers=2, block=100)
    assert np.array_equal(one.raw, two.raw)
    other = riesz_mc(s, f, 0.0, 2.0, 300, seed=4, settings=st_, workers=1, block=100)
    assert not np.array_equal(one.raw, other.raw)


def test_riesz_mc_rejects_bad_input():
    s = parse_space("torus1")
    f = torus_field(1, {(1,): (1.0, 0.0)})
    with pytest.raises(ConfigurationError):
        riesz_mc(s, f, -1.0, 2.0, 10)
    with pytest.raises(ConfigurationError):
        riesz_mc(parse_space("torus2"), f, 0.0, 2.0, 10)
    with pytest.raises(ConfigurationError):
        riesz_mc(s, f, 0.0, 2.0, 10, settings=RieszSettings(compensator="dx"))


@given(st.floats(-3, 3), st.integers(0, 20))
def test_payoff_is_linear_per_path(c, index):
    rec = simulate_background_radiation(PathConfig("torus1", y=0.1, max_steps=5000, path_index=index))
    if rec.censored:
        return
    f1 = torus_field(1, {(1,): (1.0, 0.0)})
    f2 = torus_field(1, {(2,): (0.3, -0.7)})
    both = riesz_forward_payoff(rec, f1 + f2.scale(c), 0.5).vector
    parts = riesz_forward_payoff(rec, f1, 0.5).vector + c * riesz_forward_payoff(rec, f2, 0.5).vector
    assert np.allclose(both, parts, atol=1e-12)


def test_estimate_is_translation_equivariant():
    s = parse_space("torus1")
    grid = default_grid(s, 8)
    shift = 2 * math.pi / 8 * 3
    f = torus_field(1, {(1,): (1.0, 0.0)})
    g = torus_field(1, {(1,): (math.cos(shift), math.sin(shift))})  # cos(x - shift)
    st_ = RieszSettings(kappa=0.01, hmax=0.05)
    ef = riesz_mc(s, f, 0.0, 2.0, 4000, grid=grid, seed=1, settings=st_, workers=1).forward
    eg = riesz_mc(s, g, 0.0, 2.0, 4000, grid=grid, seed=2, settings=st_, workers=1).forward
    rolled, rolled_se = np.roll(ef.mean, 3, axis=0), np.roll(ef.stderr, 3, axis=0)
    z = (eg.mean - rolled) / np.sqrt(eg.stderr**2 + rolled_se**2)
    assert np.all(np.abs(z) < 4)
