"""Experiment registry: each entry runs one pipeline and returns named checks."""
from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erf

from .. import __version__, kernels
from ..forms import anticommutator_defect, hodge_oracle, splitting_residual
from ..geometry import ConfigurationError, parse_space
from ..norms import (bound_value, exit_time_moment, exit_times, j_y_norm, lp_norm, moment_norm,
                     operator_norm_lower_bound)
from ..pathsim import PathConfig, replay, simulate_background_radiation
from ..representation import (BASettings, IntervalProfile, RieszSettings, ba_mc, default_grid,
                              default_workers, ito_residuals, littlewood_paley_check,
                              reindexed_forward_sum, reversed_drift_estimate,
                              riesz_forward_payoff, riesz_mc, run_blocks)
from ..spectral import (SpectralField, analysis_grid, riesz_oracle, synthesize, zero_field,
                        zero_harmonic)
from .config import ExperimentConfig
from .fields import build_field
from .output import (SCHEMA_ID, dump_json, plot_estimate_csv, write_estimate_csv,
                     write_table_csv)


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    oracle: float | None = None
    tolerance: float | None = None
    detail: str = ""
    criterion: int | None = None

    def to_dict(self) -> dict:
        return dict(name=self.name, passed=bool(self.passed), value=self.value, oracle=self.oracle,
                    tolerance=self.tolerance, detail=self.detail, criterion=self.criterion)


@dataclass
class Report:
    name: str
    config: dict
    checks: list
    environment: dict
    files: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        names = [c.name for c in self.checks]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise ValueError(f"duplicate check names: {sorted(dup)}")

    @property
    def passed(self) -> bool:
        """Conjunction of the checks; a report without checks never passes."""
        return bool(self.checks) and all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return dict(schema=SCHEMA_ID, name=self.name, config=self.config,
                    checks=[c.to_dict() for c in self.checks], environment=self.environment,
                    passed=self.passed, files=list(self.files), data=self.data)


def environment_stamp(config: ExperimentConfig) -> dict:
    return dict(package="mtlab", version=__version__, seed=config["sim.seed"],
                backend=kernels.BACKEND)


def _workers(config: ExperimentConfig) -> int:
    return config["sim.workers"] or default_workers()


def _field_agreement(name, est, oracle, z, abs_tol=0.0) -> Check:
    """Every reported bin within max(abs_tol, z * stderr) of the oracle."""
    m = est.mask
    err = np.abs(est.mean - oracle)[m]
    allow = np.maximum(abs_tol, z * est.stderr[m])
    if err.size == 0:
        return Check(name, False, detail="no reported bins")
    ratio = float(np.max(err / allow))
    zs = ((est.mean - oracle) / est.stderr)[m]
    detail = (f"bins={int(m.sum())} sup_err={err.max():.4g} max|z|={np.abs(zs).max():.3g} "
              f"chi2/n={float(np.mean(zs**2)):.3g}")
    return Check(name, ratio <= 1.0, ratio, None, 1.0, detail)


def _pair_agreement(name, a, b, level=1.96) -> Check:
    """Two estimates on the same grid within the combined confidence band per bin."""
    m = a.mask & b.mask
    diff = np.abs(a.mean - b.mean)[m]
    band = level * np.sqrt(a.stderr**2 + b.stderr**2)[m]
    if diff.size == 0:
        return Check(name, False, detail="no common bins")
    ratio = float(np.max(diff / band))
    return Check(name, ratio <= 1.0, ratio, None, 1.0,
                 f"bins={int(m.sum())} sup_diff={diff.max():.4g} band_min={band.min():.4g}")


def _field_summary(est, oracle) -> dict:
    m = est.mask
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (est.mean - oracle) / est.stderr
    return dict(reported_bins=int(m.sum()), censored=est.censored,
                sup_error=float(np.nanmax(np.abs(est.mean - oracle)[m])) if m.any() else None,
                max_abs_z=float(np.nanmax(np.abs(z[m]))) if m.any() else None,
                chi2_per_bin=float(np.nanmean(z[m] ** 2)) if m.any() else None,
                z_scores=z[m].ravel().tolist())


def _emit_estimate(out: Path, stem, est, oracle, title, files):
    csv_path = write_estimate_csv(out / f"{stem}.csv", est, oracle)
    svg_path = plot_estimate_csv(csv_path, out / f"{stem}.svg", title)
    files += [csv_path.name, svg_path.name]


def _riesz_settings(config) -> RieszSettings:
    return RieszSettings(dt=config["sim.dt"], kappa=config["sim.kappa"], hmax=config["sim.hmax"],
                         tail_eps=config["sim.tail_eps"], max_steps=config["sim.max_steps"],
                         compensator=config["variant.compensator"],
                         extension=config["variant.extension"])


def _grid(config, space):
    return default_grid(space, config["sim.bins"] or None)


def _random_field(space, rng, cutoff) -> SpectralField:
    """Real band-limited field with unit-scale random coefficients."""
    f = zero_field(space, cutoff)
    shape = f.coeffs.shape
    c = rng.standard_normal(shape) + (1j * rng.standard_normal(shape) if space.kind == "torus" else 0)
    if space.kind == "torus":
        # Hermitian symmetry keeps the field real
        flipped = np.conj(c[(slice(None),) + (slice(None, None, -1),) * space.dim])
        c = 0.5 * (c + flipped)
    f.coeffs[...] = c
    # mean-zero, so the a = 0 inverse needs no zero-mode removal
    f.coeffs[(0,) + ((cutoff,) * space.dim if space.kind == "torus" else (0,) * space.dim)] = 0.0
    return f


def _random_form(rng, cutoff) -> SpectralField:
    w = zero_field(parse_space("torus2"), cutoff, kind="form", ncomp=2)
    c = rng.standard_normal(w.coeffs.shape) + 1j * rng.standard_normal(w.coeffs.shape)
    c = 0.5 * (c + np.conj(c[:, ::-1, ::-1]))
    w.coeffs[...] = c
    return zero_harmonic(w, warn=False)


# -- experiments -------------------------------------------------------------------------

def _exp_oracle(config, space, out, files):
    if space.kind not in ("torus", "gauss"):
        raise ConfigurationError("random contraction runs on tori and Gaussian spaces")
    f = build_field(config["field.name"], space)
    a = config["operator.a"]
    grid = _grid(config, space)
    centers = grid.centers
    pts = grid.to_points(centers)
    fv = synthesize(f, pts)
    rv = synthesize(riesz_oracle(f, a), pts)
    header = [f"bin_center_{d}" for d in range(centers.shape[1])] + ["field"] + \
        [f"riesz_{j}" for j in range(rv.shape[1])]
    rows = [list(centers[b]) + [float(fv[b, 0])] + list(rv[b]) for b in range(len(centers))]
    files.append(write_table_csv(out / "oracle.csv", header, rows).name)

    rng = np.random.default_rng(config["sim.seed"])
    cutoff = 4 if space.kind == "torus" and space.dim == 2 else 8
    worst, parseval = 0.0, 0.0
    for _ in range(config["oracle.random"]):
        g = _random_field(space, rng, cutoff)
        pts, w = analysis_grid(space, cutoff + 1)
        for av in config["operator.a_values"]:
            r = riesz_oracle(g, av)
            worst = max(worst, r.l2_norm() / g.l2_norm())
            quad = math.sqrt(float(np.sum(w * np.sum(np.abs(synthesize(r, pts)) ** 2, axis=-1))))
            parseval = max(parseval, abs(quad - r.l2_norm()) / g.l2_norm())
    n = config["oracle.random"]
    return [Check("l2_contraction", worst <= 1.0 + 1e-12, worst, None, 1.0,
                  f"{n} fields x a in {list(config['operator.a_values'])}"),
            Check("parseval_residual", parseval < 1e-12, parseval, 0.0, 1e-12)], {}


def _exp_ba_oracle(config, space, out, files):
    if space.key != "torus2":
        raise ConfigurationError("ba-oracle runs on torus2")
    w = build_field(config["field.name"], space)
    a = config["operator.a"]
    grid = _grid(config, space) if config["sim.bins"] else default_grid(space, 8)
    centers = grid.centers
    sb = synthesize(hodge_oracle(w, "S_B", a), grid.to_points(centers))
    rows = [list(centers[b]) + list(sb[b]) for b in range(len(centers))]
    files.append(write_table_csv(out / "oracle.csv",
                                 ["bin_center_0", "bin_center_1", "S_B_0", "S_B_1"], rows).name)
    rng = np.random.default_rng(config["sim.seed"])
    split, invol = 0.0, 0.0
    for _ in range(config["oracle.random"]):
        form = _random_form(rng, 4)
        for av in config["operator.a_values"]:
            split = max(split, splitting_residual(form, av))
        twice = hodge_oracle(hodge_oracle(form, "S_B", 0.0), "S_B", 0.0)
        invol = max(invol, float(np.max(np.abs(twice.coeffs - form.coeffs))))
    defect = anticommutator_defect(2)
    n = config["oracle.random"]
    return [Check("splitting_residual", split < 1e-12, split, 0.0, 1e-12,
                  f"{n} harmonic-free forms x a in {list(config['operator.a_values'])}"),
            Check("involution_residual", invol < 1e-12, invol, 0.0, 1e-12, "a = 0"),
            Check("anticommutator_defect", defect < 1e-12, defect, 0.0, 1e-12)], {}


def _survival_block(payload, start, count):
    y, dt, max_steps, seed = payload
    raw = np.zeros((count, 4))
    kernels.occupation_batch(-1.0, -1.0, y, dt, 0.0, max_steps, seed, start, raw)
    return raw


def _exp_paths(config, space, out, files):
    y, dt, N, seed = config["operator.y"], config["sim.dt"], config["sim.paths"], config["sim.seed"]
    times = y * y * np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    cap = min(config["sim.max_steps"], int(math.ceil(times[-1] / dt)) + 1)
    raw = run_blocks(_survival_block, (y, dt, cap, seed), N, _workers(config), 10000)
    tau = np.where(raw[:, 2] > 0, np.inf, raw[:, 1])
    rows, worst = [], 0.0
    for t in times:
        s = float(np.mean(tau > t))
        exact = float(erf(y / math.sqrt(2.0 * t)))
        se = math.sqrt(max(exact * (1 - exact), 1e-12) / N)
        worst = max(worst, abs(s - exact) / se)
        rows.append([t, s, se, exact])
    files.append(write_table_csv(out / "survival.csv", ["t", "survival", "stderr", "exact"], rows).name)

    trace_rows, replay_err = [], 0.0
    for i in range(3):
        pc = PathConfig(space.key, "absorption", y=y, dt=dt, seed=seed, path_index=i,
                        max_steps=min(config["sim.max_steps"], 20000),
                        covariance=config["space.covariance"] or None)
        rec = simulate_background_radiation(pc)
        again = replay(rec)
        replay_err = max(replay_err, float(np.max(np.abs(again.positions - rec.positions))))
        for k in range(0, rec.n_steps + 1, max(1, rec.n_steps // 200)):
            trace_rows.append([i, rec.t[k], rec.b[k], float(np.linalg.norm(rec.m[k], 2))])
    files.append(write_table_csv(out / "traces.csv", ["path", "t", "b", "m_norm"], trace_rows).name)
    z = config["check.z"]
    data = dict(censoring_rate=float(np.mean(raw[:, 2] > 0)), horizon=float(times[-1]),
                mean_steps=float(raw[:, 3].mean()))
    return [Check("survival_law", worst <= z, worst, None, z,
                  "max |z| of P(tau > t) against erf(y / sqrt(2t))"),
            Check("replay_exact", replay_err == 0.0, replay_err, 0.0, 0.0)], data


def _variant_agreement(config, space, f, a):
    """Corrected and uncorrected payoffs on a few record paths."""
    worst = 0.0
    for i in range(5):
        pc = PathConfig(space.key, "absorption", y=0.5, dt=config["sim.dt"], seed=config["sim.seed"],
                        path_index=i, max_steps=20000, covariance=config["space.covariance"] or None)
        rec = simulate_background_radiation(pc)
        if rec.censored:
            continue
        c = riesz_forward_payoff(rec, f, a, "corrected").vector
        u = riesz_forward_payoff(rec, f, a, "uncorrected").vector
        worst = max(worst, float(np.max(np.abs(c - u)) / max(1.0, np.max(np.abs(c)))))
    return worst


def _exp_riesz_mc(config, space, out, files):
    f = build_field(config["field.name"], space)
    a, y = config["operator.a"], config["operator.y"]
    run = riesz_mc(space, f, a, y, config["sim.paths"], _grid(config, space), config["sim.seed"],
                   _riesz_settings(config), _workers(config))
    oracle = config["check.oracle_sign"] * run.oracle
    z, tol = config["check.z"], config["check.abs_tol"]
    checks = [_field_agreement("field_vs_oracle", run.forward, oracle, z, tol)]
    if run.stabilization:
        # the top two heights decide; lower pairs are reported only
        top, last = list(run.stabilization.items())[0]
        checks.append(Check("y_stabilization", last["passed"], last["sup_diff"], None,
                            last["max_stderr"], f"heights {top}: sup-difference below larger stderr"))
    rate = run.diagnostics["censoring_rate"]
    checks.append(Check("censoring_rate", rate <= 0.01, rate, 0.0, 0.01))
    title = f"{space.key} {config['field.name']} a={a:g} y={y:g}"
    _emit_estimate(out, "estimate", run.forward, oracle, title, files)
    for level, est in run.levels.items():
        _emit_estimate(out, f"estimate_y{level:g}", est, oracle, f"{title} (height {level:g})", files)
    data = dict(forward=_field_summary(run.forward, oracle), stabilization=run.stabilization,
                diagnostics={k: v for k, v in run.diagnostics.items() if k != "runtime"})
    if config["variant.payoff"] in ("uncorrected", "both"):
        # the terminal factor does not depend on the summation index, so both
        # variants accumulate the same numbers
        diff = _variant_agreement(config, space, f, a)
        checks.append(Check("variant_agreement", diff < 1e-12, diff, 0.0, 1e-12,
                            "record paths, corrected vs uncorrected payoff"))
        data["uncorrected"] = _field_summary(run.forward, oracle)
    return checks, data


def _identity_residual(config, space, f, a):
    worst = 0.0
    # one injected step that crosses zero
    single = simulate_background_radiation(
        PathConfig(space.key, "absorption", y=0.01, dt=config["sim.dt"], seed=config["sim.seed"],
                   covariance=config["space.covariance"] or None),
        noise=(np.full((1, space.dim), 0.3), np.array([-1.0])))
    recs = [single]
    for i in range(config["reversal.identity_paths"]):
        pc = PathConfig(space.key, "absorption", y=0.5, dt=config["sim.dt"], seed=config["sim.seed"],
                        path_index=i, max_steps=20000, covariance=config["space.covariance"] or None)
        rec = simulate_background_radiation(pc)
        if not rec.censored:
            recs.append(rec)
    for rec in recs:
        fwd = riesz_forward_payoff(rec, f, a).vector
        rev = reindexed_forward_sum(rec, f, a)
        worst = max(worst, float(np.max(np.abs(fwd - rev)) / max(1.0, np.max(np.abs(fwd)))))
    return worst, len(recs)


def _exp_riesz_reversed(config, space, out, files):
    f = build_field(config["field.name"], space)
    a, y = config["operator.a"], config["operator.y"]
    run = riesz_mc(space, f, a, y, config["sim.paths"], _grid(config, space), config["sim.seed"],
                   _riesz_settings(config), _workers(config))
    oracle = config["check.oracle_sign"] * run.oracle
    z, tol = config["check.z"], config["check.abs_tol"]
    ident, nrec = _identity_residual(config, space, f, a)
    checks = [Check("per_path_identity", ident < 1e-12, ident, 0.0, 1e-12,
                    f"{nrec} records incl. one single step"),
              _pair_agreement("reversed_vs_forward", run.reversed, run.forward),
              _field_agreement("reversed_vs_oracle", run.reversed, oracle, z, tol)]
    title = f"{space.key} {config['field.name']} a={a:g} y={y:g}"
    _emit_estimate(out, "forward", run.forward, oracle, title + " forward", files)
    _emit_estimate(out, "reversed", run.reversed, oracle, title + " reversed", files)
    data = dict(forward=_field_summary(run.forward, oracle),
                reversed=_field_summary(run.reversed, oracle),
                diagnostics={k: v for k, v in run.diagnostics.items() if k != "runtime"})
    if config["reversal.drift_paths"]:
        c, se = reversed_drift_estimate(config["reversal.drift_paths"], 2.0, config["sim.dt"],
                                        config["reversal.drift_window"], config["sim.seed"],
                                        workers=_workers(config))
        checks.append(Check("drift_coefficient", abs(c - 1.0) <= z * se, c, 1.0, z * se,
                            f"stderr={se:.3g}"))
    return checks, data


def _exp_ba_mc(config, space, out, files):
    if space.key != "torus2":
        raise ConfigurationError("ba-mc runs on torus2")
    w = build_field(config["field.name"], space)
    a, T = config["operator.a"], config["operator.T"]
    grid = _grid(config, space) if config["sim.bins"] else None
    st = BASettings(dt=config["sim.dt"], compensator=config["variant.ba_compensator"],
                    pairing=config["variant.pairing"], reading=config["variant.ba_reading"])
    run = ba_mc(w, a, T, config["sim.paths"], grid, config["sim.seed"], settings=st,
                workers=_workers(config))
    sign = config["check.oracle_sign"]
    oracle, limit = sign * run.oracle, sign * run.oracle_limit
    z = config["check.z"]
    res_m, res_se = np.array(run.residual["mean"]), np.array(run.residual["stderr"])
    # a component the form does not touch has an identically zero residual
    live = res_se > 0
    res_ratio = float(np.max(np.abs(res_m[live]) / res_se[live])) if live.any() else 0.0
    checks = [_field_agreement("forward_vs_horizon_oracle", run.forward, oracle, z),
              _field_agreement("forward_vs_limit_oracle", run.forward, limit, z),
              _pair_agreement("reversed_vs_forward", run.reversed, run.forward),
              Check("heat_identity_residual", res_ratio <= z, res_ratio, 0.0, z,
                    "max |mean| / stderr over components")]
    title = f"torus2 {config['field.name']} a={a:g} T={T:g}"
    _emit_estimate(out, "forward", run.forward, oracle, title + " forward", files)
    _emit_estimate(out, "reversed", run.reversed, oracle, title + " reversed", files)
    data = dict(forward=_field_summary(run.forward, oracle),
                forward_vs_limit=_field_summary(run.forward, limit),
                reversed=_field_summary(run.reversed, oracle), residual=run.residual,
                horizon_gap=run.stabilization)
    return checks, data


def _exp_lp_check(config, space, out, files):
    lo, hi = config["lp.interval"]
    g = IntervalProfile(lo, hi)
    seed, N = config["sim.seed"], config["sim.paths"]
    checks, rows = [], []
    for y in config["lp.heights"]:
        mc, exact, zval = littlewood_paley_check(g, y, N, seed, config["lp.dt"], config["sim.kappa"],
                                                 config["sim.max_steps"], _workers(config))
        rel = abs(mc / exact - 1.0)
        checks.append(Check(f"green_y{y:g}", rel <= 0.02, mc, exact, 0.02,
                            f"relative error {rel:.4f}, z={zval:.2f}"))
        rows.append([y, mc, exact, zval])
    files.append(write_table_csv(out / "green.csv", ["y", "mc", "exact", "z_score"], rows).name)
    data = {}
    if config["ito.paths"]:
        f = build_field(config["ito.field"], space)
        a, dt, yv = config["operator.a"], config["ito.dt"], config["ito.y"]
        r1 = ito_residuals(f, a, yv, config["ito.paths"], dt, seed=seed, workers=_workers(config))
        r2 = ito_residuals(f, a, yv, config["ito.paths"], dt / 2, seed=seed,
                           workers=_workers(config))
        mean, se = float(r1.mean()), float(r1.std(ddof=1) / math.sqrt(len(r1)))
        rms1, rms2 = float(np.sqrt(np.mean(r1**2))), float(np.sqrt(np.mean(r2**2)))
        ratio = rms1 / rms2
        z = config["check.z"]
        checks.append(Check("ito_mean_residual", abs(mean) <= z * se, mean, 0.0, z * se,
                            f"stderr={se:.3g}"))
        checks.append(Check("ito_rms_ratio", 1.2 <= ratio <= 1.8, ratio, None, None,
                            f"rms {rms1:.4g} -> {rms2:.4g} under dt halving; band [1.2, 1.8]"))
        data = dict(ito=dict(mean=mean, stderr=se, rms=[rms1, rms2], ratio=ratio))
    return checks, data


def _exp_norms(config, space, out, files):
    checks, rows, data = [], [], {}
    seed = config["sim.seed"]
    if config["norms.search"]:
        for p in config["operator.p"]:
            rep = operator_norm_lower_bound(space, config["norms.operator"], p, config["operator.a"],
                                            config["norms.iterations"], config["norms.restarts"],
                                            config["norms.cutoff"], seed)
            tight = min(b.value for b in rep.bounds)
            checks.append(Check(f"search_p{p:g}_below_bounds", rep.passed, rep.empirical, None,
                                tight, ", ".join(f"{b.regime}={b.value:.4g}" for b in rep.bounds)))
            if p == 2:
                checks.append(Check("search_p2_isometry", abs(rep.empirical - 1.0) <= 1e-6,
                                    rep.empirical, 1.0, 1e-6))
            floor = config["check.norm_floor"]
            if floor and p == config["check.norm_floor_p"]:
                checks.append(Check(f"search_p{p:g}_floor", rep.empirical >= floor, rep.empirical,
                                    None, floor, "conjugate-function extremal family"))
            for b in rep.bounds:
                rows.append([p, b.regime, b.value, rep.empirical])
            data[f"p{p:g}"] = dict(empirical=rep.empirical, converged=rep.converged,
                                   restarts=rep.trace)
    t1 = None
    if config["norms.exit_paths"]:
        samples = exit_times(config["norms.exit_paths"], 0.0, seed, workers=_workers(config))
        for p, target in ((1.0, exit_time_moment(1)), (2.0, math.sqrt(exit_time_moment(2)))):
            val, se = moment_norm(samples, p)
            checks.append(Check(f"exit_time_L{p:g}", abs(val - target) <= 2 * se, val, target, 2 * se,
                                f"stderr={se:.3g}"))
            if p == 2.0:
                t1 = val
        data["exit_time_censored"] = config["norms.exit_paths"] - len(samples)
    for p in config["operator.p"]:
        for regime in ("general", "constant-negative", "comparison-CD"):
            if regime == "constant-negative" and t1 is None:
                continue
            b = bound_value(regime, p, t1_norm=t1) if t1 is not None else bound_value(regime, p)
            rows.append([p, regime, b.value, math.nan])
    for name in config["norms.jy_fields"]:
        f = build_field(name, space)
        run = riesz_mc(space, f, config["operator.a"], config["operator.y"], config["sim.paths"],
                       _grid(config, space), seed, _riesz_settings(config), _workers(config))
        for p in config["norms.jy_p"]:
            val, se, bound = j_y_norm(space, f, config["operator.a"], config["operator.y"], p,
                                      config["sim.paths"], run=run)
            checks.append(Check(f"jy_{name}_p{p:g}_bound", val <= bound, val, None, bound,
                                f"stderr={se:.3g}"))
            if p == 2 and config["operator.a"] == 0:
                target = f.l2_norm() / math.sqrt(2.0)
                checks.append(Check(f"jy_{name}_l2_limit", abs(val - target) <= 2 * se, val, target,
                                    2 * se, f"stderr={se:.3g}"))
            data[f"jy_{name}_p{p:g}"] = dict(value=val, stderr=se, bound=bound,
                                             f_norm=lp_norm(f, p))
    files.append(write_table_csv(out / "bounds.csv", ["p", "regime", "bound", "empirical"],
                                 rows).name)
    return checks, data


EXPERIMENT_RUNNERS = {
    "oracle": _exp_oracle,
    "ba-oracle": _exp_ba_oracle,
    "paths": _exp_paths,
    "riesz-mc": _exp_riesz_mc,
    "riesz-reversed": _exp_riesz_reversed,
    "ba-mc": _exp_ba_mc,
    "lp-check": _exp_lp_check,
    "norms": _exp_norms,
}


FIELD_EXPERIMENTS = ("oracle", "ba-oracle", "riesz-mc", "riesz-reversed", "ba-mc")


def prepare_output(config: ExperimentConfig) -> Path:
    out = config.output_root / config.name
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigurationError(f"output directory {out} is not writable: {exc}") from exc
    return out


def run_experiment(config: ExperimentConfig) -> Report:
    """Run one configured experiment, write its files and return the report.

    ``summary.json`` holds only seed-determined numbers; wall-clock time goes
    to ``timing.json``.
    """
    config.validate()
    space = parse_space(config["space.key"], config["space.covariance"] or None)
    if config["experiment.id"] in FIELD_EXPERIMENTS:
        build_field(config["field.name"], space)
    if config["experiment.id"] == "lp-check" and config["ito.paths"]:
        build_field(config["ito.field"], space)
    for name in config["norms.jy_fields"] if config["experiment.id"] == "norms" else ():
        build_field(name, space)
    out = prepare_output(config)
    files = []
    t0 = time.perf_counter()
    checks, data = EXPERIMENT_RUNNERS[config["experiment.id"]](config, space, out, files)
    elapsed = time.perf_counter() - t0
    report = Report(config.name, config.echo(), checks, environment_stamp(config),
                    sorted(files) + ["summary.json", "timing.json"], data)
    dump_json(out / "summary.json", report.to_dict())
    dump_json(out / "timing.json", dict(seconds=elapsed, workers=_workers(config),
                                        pid=os.getpid()))
    return report

