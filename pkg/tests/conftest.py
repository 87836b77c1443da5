import math

import pytest
from hypothesis import HealthCheck, settings

from locspec.mmspace import BallSpec, SpaceDescriptor

settings.register_profile(
    "locspec",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("locspec")

PI = math.pi

ACCEPTANCE_LINES = []


@pytest.fixture
def half_line():
    return SpaceDescriptor.half_line(0.0)


@pytest.fixture
def example_ball():
    return BallSpec(PI / 4, PI / 4)


@pytest.fixture
def circle2pi():
    return SpaceDescriptor.circle(2 * PI)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record and print one pass/fail line per acceptance criterion."""

    def record(name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record
