import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mtlab.geometry import ConfigurationError, PointFrame
from mtlab.pathsim import (PathConfig, ito_accumulate, path_rng, replay, reverse_record,
                           simulate_background_radiation, simulate_heat_horizon)


@pytest.mark.parametrize("kwargs", [
    dict(space="torus1", mode="sideways", y=1.0),
    dict(space="torus1", y=0.0),
    dict(space="torus1", y=1.0, dt=0.0),
    dict(space="torus1", mode="horizon"),
    dict(space="torus1", y=1.0, max_steps=0),
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        PathConfig(**kwargs)


def test_wrong_mode_for_simulator():
    with pytest.raises(ConfigurationError):
        simulate_heat_horizon(PathConfig("torus1", y=1.0))


def test_injected_crossing_is_interpolated():
    # b: 1 -> 0.5 -> -0.1 with dt = 1; the crossing sits 0.5/0.6 into the second step
    cfg = PathConfig("torus1", y=1.0, dt=1.0)
    start = PointFrame(np.array([0.0]), np.eye(1))
    rec = simulate_background_radiation(cfg, start, noise=([[0.0], [0.0], [0.0]], [-0.5, -0.6, 5.0]))
    assert rec.n_steps == 2 and not rec.censored
    assert rec.tau == pytest.approx(1.0 + 0.5 / 0.6, abs=1e-12)
    assert rec.b[-1] == 0.0
    assert np.allclose(rec.dB, [-0.5, -0.5])


def test_injected_sequence_exhausted_is_censored():
    cfg = PathConfig("torus1", y=1.0, dt=0.1)
    rec = simulate_background_radiation(cfg, noise=([[0.0]] * 3, [0.1] * 3))
    assert rec.censored and rec.n_steps == 3


def test_path_rng_keyed_by_seed_and_index():
    a = path_rng(7, 3).standard_normal(4)
    assert np.array_equal(a, path_rng(7, 3).standard_normal(4))
    assert not np.array_equal(a, path_rng(7, 4).standard_normal(4))
    assert not np.array_equal(a, path_rng(8, 3).standard_normal(4))


@given(st.sampled_from(["torus2", "gauss1", "quartic1", "sphere2"]), st.integers(0, 10**6))
def test_replay_is_bit_exact(space, index):
    rec = simulate_background_radiation(
        PathConfig(space, y=0.1, dt=1e-3, max_steps=400, path_index=index, seed=1))
    again = replay(rec)
    assert np.array_equal(again.positions, rec.positions)
    assert np.array_equal(again.frames, rec.frames)
    assert np.array_equal(again.m, rec.m)


@given(st.integers(0, 10**6))
def test_reverse_twice_restores_increments(index):
    rec = simulate_background_radiation(PathConfig("sphere2", y=0.1, max_steps=400, path_index=index))
    back = reverse_record(reverse_record(rec))
    assert np.array_equal(back.positions, rec.positions)
    assert np.array_equal(back.noise, rec.noise)
    assert np.array_equal(back.dB, rec.dB)
    assert np.allclose(back.t, rec.t, atol=1e-12)
    assert np.allclose(back.m, rec.m, atol=1e-10)


def test_reversed_functional_endpoints():
    rec = simulate_background_radiation(PathConfig("quartic1", y=0.2, max_steps=2000, path_index=5))
    rev = reverse_record(rec)
    assert np.allclose(rev.m[0], np.eye(1))
    assert np.allclose(rev.m[-1], rec.m[-1])
    assert rev.tau == pytest.approx(rec.tau)


def test_gauss_functional_is_exponential():
    rec = simulate_heat_horizon(PathConfig("gauss1", mode="horizon", T=0.5, dt=0.01))
    assert rec.tau == pytest.approx(0.5)
    assert np.allclose(rec.m[:, 0, 0], np.exp(-0.5 * rec.t), rtol=1e-12)
    assert rec.b.max() == 0.0


def test_heat_horizon_last_step_is_trimmed():
    rec = simulate_heat_horizon(PathConfig("torus1", mode="horizon", T=0.25, dt=0.1))
    assert np.allclose(rec.h, [0.1, 0.1, 0.05])
    assert not rec.censored


def test_ito_accumulate_drivers():
    rec = simulate_background_radiation(PathConfig("torus2", y=0.3, max_steps=5000, path_index=2))
    # integral of dB is B_tau - B_0
    assert ito_accumulate(rec, lambda s: 1.0) == pytest.approx(-0.3, abs=1e-12)
    w = ito_accumulate(rec, lambda s: np.array([1.0, 0.0]), driver="dW")
    assert w == pytest.approx(rec.dW[:, 0].sum())
    with pytest.raises(ConfigurationError):
        ito_accumulate(rec, lambda s: 1.0, driver="dZ")


def test_torus_positions_follow_increments():
    rec = simulate_background_radiation(PathConfig("torus1", y=0.2, max_steps=3000, path_index=9))
    moved = rec.positions[0, 0] + rec.dW[:, 0].sum()
    assert math.remainder(rec.positions[-1, 0] - moved, 2 * math.pi) == pytest.approx(0.0, abs=1e-9)


def test_sphere_functional_is_scaled_rotation():
    rec = simulate_heat_horizon(PathConfig("sphere2", mode="horizon", T=1.0, dt=1e-3, path_index=3))
    for t, m in zip(rec.t[::100], rec.m[::100]):
        u = m * math.exp(t / 2)
        assert np.allclose(u @ u.T, np.eye(2), atol=1e-6)
