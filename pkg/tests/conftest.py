import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pointlb.sampling import circle, fibonacci_sphere, hemisphere, line

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = sorted(config.stash.get(_VERDICTS, []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def verdict(request):
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} [{number:2d}] {name}: {detail}"
        request.config.stash[_VERDICTS].append((number, line))
        print(line)
        assert passed, line

    return record


@pytest.fixture(scope="session")
def circle200():
    return circle(200)


@pytest.fixture(scope="session")
def sphere500():
    return fibonacci_sphere(500)


@pytest.fixture(scope="session")
def hemi600():
    return hemisphere(600)


@pytest.fixture(scope="session")
def line101():
    return line(101)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
