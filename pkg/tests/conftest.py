import numpy as np
import pytest

from lbbnet.array import ArrayConfig
from lbbnet.scene import Building, Scene


@pytest.fixture
def cfg16():
    return ArrayConfig(4, 3.5e9)


@pytest.fixture
def empty_scene():
    return Scene((0, 0, 100, 80), [], (5, 40), max_bounces=1, max_paths=10)


@pytest.fixture
def two_building_scene():
    return Scene((0, 0, 120, 90),
                 [Building(40, 10, 60, 35, 0.6), Building(70, 50, 95, 70, 0.5)],
                 (10, 45), max_bounces=2, max_paths=50)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects one status line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
