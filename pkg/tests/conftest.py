from pathlib import Path

import pytest

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def golden_dir():
    return GOLDEN


def read_golden_values():
    out = {}
    for line in (GOLDEN / "reference_values.txt").read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = float(value)
    return out


# acceptance bookkeeping: test name -> (label, detail); filled in by test_acceptance.py
ACCEPTANCE_DETAILS = {}
_ACCEPTANCE_OUTCOMES = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE_OUTCOMES[name] = (report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for name, (outcome, duration) in _ACCEPTANCE_OUTCOMES.items():
        label, detail = ACCEPTANCE_DETAILS.get(name, (name, ""))
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {label}  ({duration:.1f} s)  {detail}")
