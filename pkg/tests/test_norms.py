import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mtlab.geometry import ConfigurationError, parse_space
from mtlab.norms import (REGIMES, bound_value, burkholder_bp, exit_time_moment, exit_times,
                         general_constant, lp_norm, moment_norm, operator_norm_lower_bound, p_star)
from mtlab.representation import condition_on_exit, default_grid
from mtlab.spectral import hermite_field, torus_field

exponent = st.floats(1.05, 20.0)


@given(exponent)
def test_p_star_symmetric_under_conjugation(p):
    q = p / (p - 1)
    assert p_star(p) == pytest.approx(p_star(q))
    assert p_star(p) >= 2.0 - 1e-12


@given(exponent, exponent)
def test_flat_bound_monotone_away_from_two(p, r):
    if abs(p - 2) < 1e-9 or abs(r - 2) < 1e-9:
        return
    bp, br = bound_value("flat", p).value, bound_value("flat", r).value
    if p_star(p) <= p_star(r):
        assert bp <= br + 1e-12


def test_constants():
    assert general_constant(1.5) == pytest.approx(12 * math.sqrt(6) * 0.5**-1.5)
    assert general_constant(1.5) == pytest.approx(83.138, abs=1e-3)
    assert general_constant(2) == pytest.approx(6 * math.sqrt(6))
    assert burkholder_bp(2) == 1.0
    assert burkholder_bp(4) == pytest.approx(2.0)
    assert burkholder_bp(1.5) == pytest.approx(math.sqrt(3) * 0.5**-1.5)
    assert bound_value("flat", 3).value == pytest.approx(4.0)
    assert bound_value("constant-negative", 3, t1_norm=0.5).value == pytest.approx(12.0)
    assert bound_value("BA-flat", 4, b_norm=2).value == pytest.approx(12.0)


def test_bound_inputs_are_validated():
    for bad in (lambda: p_star(1.0), lambda: bound_value("L2", 3),
                lambda: bound_value("constant-negative", 3), lambda: bound_value("other", 3)):
        with pytest.raises(ConfigurationError):
            bad()
    assert len(REGIMES) == 7


def test_exit_time_closed_forms():
    assert exit_time_moment(1) == pytest.approx(1 / 3)
    assert exit_time_moment(2) == pytest.approx(7 / 45)
    assert exit_time_moment(1, 1.0) == 0.0 and exit_time_moment(2, 1.0) == 0.0
    with pytest.raises(ConfigurationError):
        exit_time_moment(3)


def test_exit_time_sampler_matches_moments():
    t = exit_times(20000, seed=11, workers=1)
    m1, se1 = moment_norm(t, 1)
    m2, se2 = moment_norm(t, 2)
    assert abs(m1 - 1 / 3) < 4 * se1
    assert abs(m2 - math.sqrt(7 / 45)) < 4 * se2


def test_moment_norm_of_constants():
    v, se = moment_norm(np.full(10, 3.0), 2.5)
    assert v == pytest.approx(3.0) and se == 0.0


def test_lp_norms_of_cos():
    f = torus_field(1, {(1,): (1.0, 0.0)})
    assert lp_norm(f, 2) == pytest.approx(1 / math.sqrt(2), rel=1e-12)
    assert lp_norm(f, 1) == pytest.approx(2 / math.pi, rel=1e-4)
    h = hermite_field(parse_space("gauss1"), {1: 1.0})
    assert lp_norm(h, 4) == pytest.approx(3**0.25, rel=1e-10)
    with pytest.raises(ConfigurationError):
        lp_norm(f, 0.5)


def test_lp_norm_of_estimate_weights_by_counts():
    g = default_grid(parse_space("torus1"), 2)
    est = condition_on_exit(np.array([[1.0], [1.0], [4.0]]), np.array([1.0, 1.0, 4.0]), g, floor=1)
    assert lp_norm(est, 1) == pytest.approx((1 + 1 + 4) / 3)


def test_search_at_p2_finds_isometry():
    rep = operator_norm_lower_bound(parse_space("torus1"), p=2.0, cutoff=4, restarts=2,
                                    iterations=30)
    assert rep.empirical == pytest.approx(1.0, abs=1e-9)
    assert rep.passed


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_search_stays_below_conjugate_function_norm(p):
    rep = operator_norm_lower_bound(parse_space("torus1"), p=p, cutoff=16, restarts=2,
                                    iterations=60)
    # sharp norm of the conjugate function on the circle
    sharp = 1.0 / math.tan(math.pi / (2 * p_star(p)))
    assert 1.2 < rep.empirical <= sharp + 1e-9
    assert rep.passed and {b.regime for b in rep.bounds} >= {"flat", "general"}


def test_search_on_gauss_and_rejects_unknown_probe():
    rep = operator_norm_lower_bound(parse_space("gauss1"), p=3.0, cutoff=8, restarts=2,
                                    iterations=40)
    assert rep.passed and rep.empirical > 0.9
    with pytest.raises(ConfigurationError):
        operator_norm_lower_bound(parse_space("sphere2"))


@pytest.mark.parametrize("p", np.geomspace(1.01, 50, 25))
def test_general_bound_exceeds_flat(p):
    if p == 2:
        return
    assert bound_value("general", p).value > bound_value("flat", p).value


@given(st.floats(1.001, 1.999))
def test_conjugacy_identity_below_two(p):
    assert (p - 1) ** -1.5 == pytest.approx((p_star(p) - 1) ** 1.5, rel=1e-12)
