import numpy as np
import pytest

from mtlab import kernels
from mtlab.geometry import parse_space
from mtlab.norms import exit_times
from mtlab.representation import (IntervalProfile, RieszSettings, littlewood_paley_check,
                                  reversed_drift_estimate, riesz_mc)
from mtlab.spectral import sphere_field, torus_field

compiled_only = pytest.mark.skipif(kernels.BACKEND != "compiled",
                                   reason="compiled extension not built")

ENTRY_POINTS = ("Stream", "FieldTable", "riesz_batch", "ba_batch", "ito_batch", "occupation_batch",
                "exit_time_batch", "reversed_drift_batch", "sample_stationary_batch")


@pytest.fixture
def pure_python(monkeypatch):
    mod = kernels.load("python")

    def use():
        for name in ENTRY_POINTS:
            monkeypatch.setattr(kernels, name, getattr(mod, name))
    return use


def test_load_rejects_unknown_backend():
    with pytest.raises(ValueError):
        kernels.load("fortran")
    assert kernels.load("python").RIESZ_COLUMNS == kernels.RIESZ_COLUMNS


def test_stream_is_block_independent():
    mod = kernels.load("python")
    a = mod.Stream(7, 12)
    b = mod.Stream(7, 12)
    assert [a.uniform() for _ in range(5)] == [b.uniform() for _ in range(5)]
    assert mod.Stream(7, 13).uniform() != mod.Stream(7, 12).uniform()


@compiled_only
def test_splitmix_agrees():
    py = kernels.load("python")
    for z in (0, 1, 2**63, 2**64 - 1, 123456789):
        assert kernels.load("compiled").splitmix(z) == py.splitmix(z)


@compiled_only
@pytest.mark.parametrize("key,field", [
    ("torus1", torus_field(1, {(1,): (1.0, 0.0), (2,): (0.0, 0.5)})),
    ("sphere2", sphere_field({(1, 0): 1.0})),
])
def test_riesz_backends_agree(pure_python, key, field):
    space = parse_space(key)
    st = RieszSettings(kappa=0.01, hmax=0.05)
    fast = riesz_mc(space, field, 1.0, 2.0, 12, seed=5, settings=st, workers=1).raw
    pure_python()
    slow = riesz_mc(space, field, 1.0, 2.0, 12, seed=5, settings=st, workers=1).raw
    assert np.allclose(fast, slow, rtol=1e-9, atol=1e-12)


@compiled_only
def test_scalar_kernels_agree(pure_python):
    args = dict(seed=2, workers=1)
    fast = (exit_times(50, **args),
            littlewood_paley_check(IntervalProfile(0, 1), 0.5, 50, dt=1e-3, **args),
            reversed_drift_estimate(50, dt=1e-2, **args))
    pure_python()
    slow = (exit_times(50, **args),
            littlewood_paley_check(IntervalProfile(0, 1), 0.5, 50, dt=1e-3, **args),
            reversed_drift_estimate(50, dt=1e-2, **args))
    for f, s in zip(fast, slow):
        assert np.allclose(f, s, rtol=1e-9)
