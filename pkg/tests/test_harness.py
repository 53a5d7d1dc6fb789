import json

import pytest
from hypothesis import given, strategies as st

from mtlab.geometry import ConfigurationError
from mtlab.harness import (ExperimentConfig, build_suite, load_config, parse_config,
                           run_experiment, save_config, verify_all)
from mtlab.harness.cli import main
from mtlab.harness.config import EXPERIMENTS
from mtlab.harness.experiments import Check, Report
from mtlab.harness.output import estimate_header, read_csv, validate_summary

SMALL_MC = {"experiment.id": "riesz-mc", "space.key": "torus1", "field.name": "cos",
            "sim.paths": 2000, "sim.kappa": 0.01, "sim.hmax": 0.05, "operator.y": 2.0,
            "sim.bins": 8, "check.abs_tol": 0.2}


@given(st.sampled_from(EXPERIMENTS), st.integers(0, 2**31), st.integers(1, 10**6),
       st.floats(0, 10, allow_nan=False), st.sampled_from(["corrected", "uncorrected", "both"]))
def test_config_text_round_trip(exp, seed, paths, a, variant):
    cfg = ExperimentConfig({"experiment.id": exp, "sim.seed": seed, "sim.paths": paths,
                            "operator.a": a, "variant.payoff": variant})
    again = parse_config(cfg.to_text())
    assert again.to_text() == cfg.to_text()
    assert again["operator.a"] == a and again["sim.seed"] == seed


def test_config_file_round_trip(tmp_path):
    cfg = ExperimentConfig({"experiment.id": "norms", "operator.p": (1.5, 3.0)})
    save_config(cfg, tmp_path / "c.cfg")
    assert load_config(tmp_path / "c.cfg").to_text() == cfg.to_text()


@pytest.mark.parametrize("values,match", [
    ({"sim.pathz": 3}, "sim.pathz"),
    ({"space.key": "torus9"}, "torus9"),
    ({"operator.p": "0.5"}, "p"),
    ({"sim.paths": "many"}, "sim.paths"),
    ({"experiment.id": "everything"}, "everything"),
])
def test_bad_config_is_named(values, match):
    with pytest.raises(ConfigurationError, match=match):
        ExperimentConfig(dict(values)).validate()


def test_echo_omits_execution_keys():
    cfg = ExperimentConfig({"sim.workers": 4, "output.dir": "/x"})
    assert "sim.workers" not in cfg.echo() and "output.dir" not in cfg.echo()


def test_unwritable_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = ExperimentConfig({"experiment.id": "oracle", "output.dir": str(blocker / "sub")})
    with pytest.raises(ConfigurationError, match="not writable"):
        run_experiment(cfg)


def test_field_space_mismatch_fails_before_output(tmp_path):
    cfg = ExperimentConfig({"experiment.id": "riesz-mc", "space.key": "gauss1",
                            "field.name": "Y10", "output.dir": str(tmp_path / "o")})
    with pytest.raises(ConfigurationError):
        run_experiment(cfg)
    assert not (tmp_path / "o").exists()


def test_report_rejects_duplicate_checks():
    c = Check("a", True, 1.0, 1.0, 0.1, "")
    with pytest.raises(ValueError):
        Report("x", {}, [c, c], {})
    assert not Report("x", {}, [], {}).passed


def test_cli_exit_codes(out_dir, capsys):
    assert main(["oracle", "--space", "torus1"]) == 0
    assert "overall: PASS" in capsys.readouterr().out
    assert main(["oracle", "--space", "torus9"]) == 2
    assert "torus9" in capsys.readouterr().err
    assert main(["oracle", "--set", "nonsense"]) == 2


def test_cli_negative_control_names_failing_check(out_dir, capsys):
    flags = ["riesz-mc", "--paths", "2000", "--y", "2", "--bins", "8", "--set", "sim.kappa=0.01",
             "--set", "sim.hmax=0.05", "--set", "check.oracle_sign=-1"]
    assert main(flags) == 1
    out = capsys.readouterr().out
    assert "[FAIL] field_vs_oracle" in out and "failed: field_vs_oracle" in out


def test_small_run_passes_and_writes_schema(tmp_path):
    cfg = ExperimentConfig(dict(SMALL_MC, **{"output.dir": str(tmp_path)}))
    rep = run_experiment(cfg)
    assert rep.passed, rep.failures
    out = tmp_path / cfg.name
    header, rows = read_csv(out / "estimate.csv")
    assert header == estimate_header(1, 1) and len(rows) == 8
    summary = json.loads((out / "summary.json").read_text())
    assert validate_summary(summary) == []
    assert (out / "estimate.svg").stat().st_size > 0


def test_validate_summary_flags_problems():
    bad = {"schema": "other", "passed": True, "checks": [
        {"name": "a", "passed": False, "value": True}], "surprise": 1}
    problems = " ".join(validate_summary(bad))
    for word in ("schema id", "missing key 'name'", "surprise", "conjunction", "boolean"):
        assert word in problems


def test_summary_independent_of_workers(tmp_path):
    texts = []
    for w in (1, 2):
        cfg = ExperimentConfig(dict(SMALL_MC, **{"output.dir": str(tmp_path / str(w)),
                                                 "sim.workers": w, "sim.paths": 4500}))
        run_experiment(cfg)
        texts.append((tmp_path / str(w) / cfg.name / "summary.json").read_bytes())
    assert texts[0] == texts[1]


def test_empty_and_duplicate_suites(tmp_path):
    with pytest.raises(ConfigurationError, match="empty"):
        verify_all([])
    cfg = ExperimentConfig({"experiment.id": "oracle", "output.dir": str(tmp_path)})
    with pytest.raises(ConfigurationError, match="distinct"):
        verify_all([cfg, cfg])
    with pytest.raises(ConfigurationError):
        build_suite("slow")


def test_custom_suite_prefixes_check_names(tmp_path):
    good = ExperimentConfig({"experiment.id": "oracle", "experiment.name": "ok",
                             "output.dir": str(tmp_path)})
    bad = ExperimentConfig(dict(SMALL_MC, **{"experiment.name": "flipped", "check.oracle_sign": -1,
                                             "output.dir": str(tmp_path)}))
    rep = verify_all([good, bad])
    assert not rep.passed
    assert rep.failures == ["flipped/field_vs_oracle"]
    assert validate_summary(json.loads((tmp_path / "summary.json").read_text())) == []


def test_smoke_suite_and_report(tmp_path, capsys):
    rep = verify_all("smoke", output__dir=str(tmp_path), sim__workers=1)
    crits = {c.criterion for c in rep.checks}
    assert set(range(1, 13)) <= crits
    names = [c.name for c in rep.checks]
    assert len(names) == len(set(names))
    for svg in tmp_path.rglob("*.svg"):
        svg.unlink()
    code = main(["report", "--dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == (0 if rep.passed else 1)
    assert "INVALID" not in out
    plotted = {p.with_suffix(".csv") for p in tmp_path.rglob("*.svg")}
    estimates = {p for p in tmp_path.rglob("*.csv") if "estimate_0" in read_csv(p)[0]}
    assert plotted == estimates and len(estimates) >= 18
