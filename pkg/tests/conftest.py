import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mixedop import assemble, build_disc, build_interval

settings.register_profile(
    "default", deadline=None, max_examples=40, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def line_op():
    return assemble(build_interval(-1.0, 1.0, 41), 0.5)


@pytest.fixture(scope="session")
def disc_op():
    return assemble(build_disc(1.0, 21), 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_acceptance_lines: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; the lines are echoed in the terminal summary."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        _acceptance_lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
