import json
from pathlib import Path

import pytest

from regimerisk.ghyp import GhypParams
from regimerisk.regime import AssetStates, RegimeModel, TransitionMatrix

ORACLES = json.loads((Path(__file__).parent / "oracles" / "values.json").read_text())


@pytest.fixture(scope="session")
def oracles():
    return ORACLES


def two_asset_model(p11=0.98, p22=0.97):
    """A calm/volatile pair of daily-return laws for two markets."""
    a = AssetStates.with_mean("A", GhypParams(-0.5, 160.0, -4.0, 0.010),
                              GhypParams(1.0, 50.0, -5.0, 0.016), 0.0004)
    b = AssetStates.with_mean("B", GhypParams(-0.5, 250.0, 0.0, 0.007),
                              GhypParams(0.5, 90.0, 3.0, 0.012), 0.0001)
    return RegimeModel(TransitionMatrix(p11, p22), (a, b))


def one_asset_model(p11=0.98, p22=0.95):
    a = AssetStates.with_mean("X", GhypParams(-0.5, 150.0, -5.0, 0.012),
                              GhypParams(1.0, 60.0, -8.0, 0.02), 0.0003)
    return RegimeModel(TransitionMatrix(p11, p22), (a,))


@pytest.fixture
def model2():
    return two_asset_model()


@pytest.fixture
def model1():
    return one_asset_model()


ACCEPTANCE_LINES = {}


def record_acceptance(number, passed, detail):
    """Store the one-line verdict for acceptance criterion ``number``."""
    line = f"acceptance criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
