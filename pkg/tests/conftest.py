import os

import pytest
from hypothesis import settings

settings.register_profile("mtlab", deadline=None, max_examples=40)
settings.load_profile("mtlab")

# criterion number -> (passed, message), filled by test_acceptance
ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("MTLAB_OUTPUT", str(tmp_path / "out"))
    return tmp_path / "out"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE_LINES):
        ok, msg = ACCEPTANCE_LINES[crit]
        terminalreporter.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'}  {msg}")


def workers() -> int:
    return max(1, int(os.environ.get("MTLAB_WORKERS", "1")))
