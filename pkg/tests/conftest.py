import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from amsalloc import f18
from amsalloc.allocator import build_ams

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def model():
    return f18.model()


@pytest.fixture(scope="session")
def actuators():
    return f18.actuators()


@pytest.fixture(scope="session")
def position_ams(model):
    return build_ams(model, "position_only")


@pytest.fixture(scope="session")
def rate_exact_ams(model):
    return build_ams(model, "rate_exact")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one criterion: print its PASS/FAIL line, then assert it."""
    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line, flush=True)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
