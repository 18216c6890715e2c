from pathlib import Path

import pytest

from dbslab import ObservationModel

ROOT = Path(__file__).resolve().parents[1]
EXPERIMENTS = ROOT / "experiments"

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def exp1_model():
    return ObservationModel.poisson(10.0, 1.0)


@pytest.fixture
def exp2_model():
    return ObservationModel.poisson(2.0, 0.001)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
