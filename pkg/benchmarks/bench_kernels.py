"""Time the compiled kernels against their interpreted source on identical workloads.

    python3 benchmarks/bench_kernels.py --paths 200

Both backends consume the same counter-based streams, so the outputs are
compared as well as timed.
"""
import argparse
import time

import numpy as np

from mtlab import kernels
from mtlab.geometry import parse_space
from mtlab.norms import exit_times
from mtlab.representation import IntervalProfile, RieszSettings, littlewood_paley_check, riesz_mc
from mtlab.spectral import sphere_field, torus_field

SWAPPED = ("Stream", "FieldTable", "riesz_batch", "ba_batch", "ito_batch", "occupation_batch",
           "exit_time_batch", "reversed_drift_batch", "sample_stationary_batch")


def use_backend(name):
    mod = kernels.load(name)
    for attr in SWAPPED:
        setattr(kernels, attr, getattr(mod, attr))


def workloads(n):
    st = RieszSettings(kappa=0.01, hmax=0.05)
    t1, s2 = parse_space("torus1"), parse_space("sphere2")
    cos = torus_field(1, {(1,): (1.0, 0.0)})
    y10 = sphere_field({(1, 0): 1.0})
    return {
        "riesz torus1 y=2": lambda: riesz_mc(t1, cos, 0.0, 2.0, n, seed=1, settings=st, workers=1).raw,
        "riesz sphere2 y=2": lambda: riesz_mc(s2, y10, 0.0, 2.0, n, seed=1, settings=st, workers=1).raw,
        "exit times": lambda: exit_times(5 * n, seed=1, workers=1),
        "occupation": lambda: np.array(littlewood_paley_check(IntervalProfile(0, 1), 0.5, 5 * n,
                                                              seed=1, dt=1e-3, workers=1)),
    }


def timed(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--paths", type=int, default=200)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if kernels.BACKEND != "compiled":
        raise SystemExit("compiled extension not built; run pip install -e . first")
    print(f"{'workload':22s} {'compiled s':>11s} {'python s':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fn in workloads(args.paths).items():
        use_backend("compiled")
        tc, a = timed(fn, args.repeat)
        use_backend("python")
        tp, b = timed(fn, 1)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        print(f"{name:22s} {tc:11.4f} {tp:10.3f} {tp / tc:8.0f}x {diff:11.2e}")
    use_backend("compiled")


if __name__ == "__main__":
    main()
