import functools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fingeo import scenario as scn  # noqa: E402

SHIPPED = scn.shipped_scenarios()
FLAT = ("flat_vacuum", "flat_constant_A", "flat_wave_A")
A_ZERO = ("flat_vacuum", "vacuum_weakfield")


@functools.lru_cache(maxsize=None)
def scenario(name):
    return scn.load_scenario(name)


@functools.lru_cache(maxsize=None)
def _points(name, count, seed):
    return tuple(scenario(name).probe_points(count, seed))


def probes(name, count=5, seed=None):
    """First ``count`` sampled probes of a shipped scenario."""
    return [(np.array(x), np.array(y)) for x, y in _points(name, count, seed)]


@pytest.fixture(params=SHIPPED)
def shipped(request):
    return scenario(request.param)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
