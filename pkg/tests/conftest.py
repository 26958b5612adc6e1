import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rgvexp import DecodingMetric, ExponentProblem, make_z_channel  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def zchan():
    return make_z_channel(0.001)


@pytest.fixture(scope="session")
def zproblem(zchan):
    """Z-channel(0.001), uniform composition, ML decoding, nats."""
    return ExponentProblem(zchan, (0.5, 0.5), DecodingMetric.ml(), base="e")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def finite(x):
    return x is not None and math.isfinite(x)
