"""Acceptance battery: the fast suite at seed 7, one test per criterion.

Each test records a PASS/FAIL line that is printed at the end of the pytest
run. The suite runs once per worker count; criterion 13 compares the two.
"""
import json
import time

import pytest

from mtlab.harness import verify_all

from conftest import ACCEPTANCE_LINES, workers

RUNTIME_BUDGET = 600.0
ORACLE_BUDGET = 5.0


def _run(root, n_workers):
    t0 = time.perf_counter()
    report = verify_all("fast", output__dir=str(root), sim__workers=n_workers)
    return report, time.perf_counter() - t0


@pytest.fixture(scope="session")
def fast_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("fast-a")
    report, seconds = _run(root, workers())
    return root, report, seconds


@pytest.fixture(scope="session")
def fast_rerun(tmp_path_factory, fast_run):
    root = tmp_path_factory.mktemp("fast-b")
    # any worker count other than the first run's
    report, seconds = _run(root, 2 if workers() != 2 else 1)
    return root, report, seconds


def _describe(check) -> str:
    val = "" if check.value is None else f"={check.value:.4g}"
    return f"{check.name.split('/', 1)[1]}{val}"


def _judge(crit, report, extra_ok=True, extra_msg=""):
    checks = [c for c in report.checks if c.criterion == crit]
    assert checks, f"no checks tagged with criterion {crit}"
    failed = [c for c in checks if not c.passed]
    ok = not failed and extra_ok
    if failed:
        msg = "failed: " + "; ".join(f"{c.name} ({c.detail})" for c in failed)
    else:
        shown = [_describe(c) for c in checks[:4]]
        msg = f"{len(checks)} checks: " + ", ".join(shown) + (" ..." if len(checks) > 4 else "")
    if extra_msg:
        msg = f"{extra_msg}; {msg}"
    ACCEPTANCE_LINES[crit] = (ok, msg)
    return ok, msg


def _entry_seconds(root, prefix):
    total = 0.0
    for timing in root.glob(f"{prefix}*/timing.json"):
        total += json.loads(timing.read_text())["seconds"]
    return total


def test_criterion_01_l2_contraction(fast_run):
    root, report, _ = fast_run
    seconds = _entry_seconds(root, "c01-")
    ok, msg = _judge(1, report, seconds < ORACLE_BUDGET, f"runtime {seconds:.2f}s")
    assert ok, msg


@pytest.mark.parametrize("crit", range(2, 13))
def test_statistical_criteria(fast_run, crit):
    ok, msg = _judge(crit, fast_run[1])
    assert ok, msg


def test_criterion_13_reproducible_and_within_budget(fast_run, fast_rerun):
    root_a, report_a, seconds = fast_run
    root_b, _, _ = fast_rerun
    a = sorted(p.relative_to(root_a) for p in root_a.rglob("summary.json"))
    b = sorted(p.relative_to(root_b) for p in root_b.rglob("summary.json"))
    differ = [str(p) for p in a if (root_a / p).read_bytes() != (root_b / p).read_bytes()]
    same = a == b and not differ
    fast_enough = seconds <= RUNTIME_BUDGET
    ok = same and fast_enough
    msg = (f"{len(a)} summaries {'identical' if same else 'DIFFER: ' + ', '.join(differ)} "
           f"across worker counts; runtime {seconds:.0f}s on {workers()} worker(s), "
           f"budget {RUNTIME_BUDGET:.0f}s")
    ACCEPTANCE_LINES[13] = (ok, msg)
    assert ok, msg
