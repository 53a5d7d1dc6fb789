import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mtlab.geometry import (ConfigurationError, ModelSpace, PointFrame, TWO_PI, curvature_action,
                            holonomy_angle, parse_space, reference_frame, sample_stationary,
                            step_diffusion)


def test_parse_space_keys():
    assert parse_space("torus2") == ModelSpace("torus", 2)
    assert parse_space("gauss2", "1,4").alpha == (1.0, 4.0)
    assert parse_space("gauss1").alpha == (1.0,)


@pytest.mark.parametrize("key", ["torus9", "sphere3", "", "gauss"])
def test_unknown_space_key_is_named(key):
    with pytest.raises(ConfigurationError, match=repr(key)):
        parse_space(key)


def test_covariance_rules():
    with pytest.raises(ConfigurationError):
        parse_space("torus1", "1")
    with pytest.raises(ConfigurationError):
        parse_space("gauss2", "1")
    with pytest.raises(ConfigurationError):
        parse_space("gauss1", "-1")


def test_normalizations():
    assert parse_space("torus2").normalization == pytest.approx(TWO_PI**2)
    assert parse_space("gauss1", "4").normalization == pytest.approx(math.sqrt(TWO_PI / 4))
    # Gamma(1/4) / sqrt(2)
    assert parse_space("quartic1").normalization == pytest.approx(math.gamma(0.25) / math.sqrt(2), rel=1e-12)


def test_stationary_moments():
    rng = np.random.default_rng(3)
    g = parse_space("gauss1", "4")
    xs = np.array([sample_stationary(g, rng).position[0] for _ in range(20000)])
    assert xs.var() == pytest.approx(0.25, rel=0.05)
    q = parse_space("quartic1")
    xs = np.array([sample_stationary(q, rng).position[0] for _ in range(20000)])
    # E x^4 = 1 under exp(-x^4/4), by integration by parts
    assert np.mean(xs**4) == pytest.approx(1.0, rel=0.05)
    s = parse_space("sphere2")
    zs = np.array([sample_stationary(s, rng).position[2] for _ in range(20000)])
    assert abs(zs.mean()) < 0.02 and zs.var() == pytest.approx(1 / 3, rel=0.05)


def test_curvature_action():
    q = parse_space("quartic1")
    assert curvature_action(q, PointFrame(np.array([2.0]), np.eye(1)))[0, 0] == 12.0
    assert np.all(curvature_action(parse_space("sphere2"), None) == np.eye(2))
    assert np.all(curvature_action(parse_space("gauss2", "1,3"), None) == np.diag([1.0, 3.0]))


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.floats(1e-4, 0.5),
       st.integers(0, 2**32 - 1))
def test_sphere_step_stays_orthonormal(noise, dt, seed):
    s = parse_space("sphere2")
    p = sample_stationary(s, np.random.default_rng(seed))
    q = step_diffusion(s, p, dt, noise)
    assert np.linalg.norm(q.position) == pytest.approx(1.0, abs=1e-13)
    assert np.allclose(q.frame @ q.frame.T, np.eye(2), atol=1e-13)
    assert np.allclose(q.frame @ q.position, 0.0, atol=1e-13)


def test_geodesic_triangle_holonomy_equals_area():
    # octant triangle: area pi/2 on the unit sphere
    s = parse_space("sphere2")
    north = np.array([0.0, 0.0, 1.0])
    state = PointFrame(north, reference_frame(s, north))
    start_frame = state.frame.copy()
    for target in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), north):
        direction = target - state.position * (target @ state.position)
        direction /= np.linalg.norm(direction)
        state = step_diffusion(s, state, 1.0, state.frame @ direction * (math.pi / 2))
        assert np.allclose(state.position, target, atol=1e-12)
    assert abs(holonomy_angle(start_frame, state.frame, north)) == pytest.approx(math.pi / 2, abs=1e-12)


@given(st.floats(0, TWO_PI, exclude_max=True), st.floats(-50, 50))
def test_torus_step_wraps(x, dx):
    s = parse_space("torus1")
    q = step_diffusion(s, PointFrame(np.array([x]), np.eye(1)), 1.0, [dx])
    assert 0.0 <= q.position[0] < TWO_PI
    assert math.remainder(q.position[0] - x - dx, TWO_PI) == pytest.approx(0.0, abs=1e-9)


def test_ou_step_drift():
    g = parse_space("gauss1", "2")
    q = step_diffusion(g, PointFrame(np.array([1.0]), np.eye(1)), 0.1, [0.0])
    assert q.position[0] == pytest.approx(1.0 - 0.5 * 0.1 * 2.0)


def test_sphere_frame_stays_orthonormal_over_long_runs():
    s = parse_space("sphere2")
    rng = np.random.default_rng(4)
    state = sample_stationary(s, rng)
    noise = rng.standard_normal((10_000, 2))
    for z in noise:
        state = step_diffusion(s, state, 1e-3, z)
    assert abs(np.linalg.norm(state.position) - 1) < 1e-6
    assert np.max(np.abs(state.frame @ state.frame.T - np.eye(2))) < 1e-6


@pytest.mark.parametrize("eps", [0.2, 0.05])
def test_small_triangle_holonomy_is_its_area(eps):
    # right isoceles geodesic triangle with legs eps at the north pole
    s = parse_space("sphere2")
    north = np.array([0.0, 0.0, 1.0])
    corners = [np.array([math.sin(eps), 0, math.cos(eps)]), np.array([0, math.sin(eps), math.cos(eps)]), north]
    state = PointFrame(north, reference_frame(s, north))
    start = state.frame.copy()
    for target in corners:
        angle = math.acos(np.clip(target @ state.position, -1, 1))
        direction = target - state.position * (target @ state.position)
        direction /= np.linalg.norm(direction)
        state = step_diffusion(s, state, 1.0, state.frame @ direction * angle)
    a, b, c = corners
    # spherical excess via the Van Oosterom-Strackee formula
    area = 2 * math.atan2(abs(a @ np.cross(b, c)), 1 + a @ b + b @ c + c @ a)
    assert abs(abs(holonomy_angle(start, state.frame, north)) - area) < 1e-10
    assert area == pytest.approx(eps**2 / 2, rel=eps)


def test_ou_zero_noise_decay():
    g = parse_space("gauss2", "1,3")
    state = PointFrame(np.array([1.0, -2.0]), np.eye(2))
    dt, n = 1e-3, 2000
    for _ in range(n):
        state = step_diffusion(g, state, dt, [0.0, 0.0])
    exact = np.array([1.0, -2.0]) * np.exp(-np.array([1.0, 3.0]) * n * dt / 2)
    assert np.allclose(state.position, exact, atol=5 * dt)


def test_torus_occupation_is_uniform():
    s = parse_space("torus1")
    rng = np.random.default_rng(5)
    state = PointFrame(np.array([0.0]), np.eye(1))
    n, bins, dt = 10**6, 32, 4.0
    hist = np.zeros(bins, dtype=int)
    noise = rng.standard_normal(n)
    for z in noise:
        state = step_diffusion(s, state, dt, (z,))
        hist[int(state.position[0] / TWO_PI * bins)] += 1
    p = 1 / bins
    # multinomial band widened for the lag-one correlation of the slowest Fourier mode
    rho = math.exp(-dt / 2)
    band = 4 * math.sqrt(n * p * (1 - p) * (1 + rho) / (1 - rho))
    assert np.all(np.abs(hist - n * p) <= band)
