import pytest
from hypothesis import HealthCheck, settings

from patchmeso.geometry import PatchGeometry
from patchmeso.operator import assemble_operator
from patchmeso.spectral import analytic_eigensystem

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

_LOG_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LOG_KEY] = []


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[_LOG_KEY]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LOG_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line)


def geometry(n, a):
    return PatchGeometry(n, a, 2 * n + 1)


@pytest.fixture(scope="session")
def es_20_5():
    return analytic_eigensystem(geometry(20, 5), 0.91)


@pytest.fixture(scope="session")
def es_20_0():
    return analytic_eigensystem(geometry(20, 0), 0.91)


@pytest.fixture(scope="session")
def op_20_5():
    return assemble_operator(geometry(20, 5), 0.91)
