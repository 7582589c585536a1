import functools

import numpy as np
import pytest

from cyclores.grid import Grid2D, make_gaussian
from cyclores.scenario import preset_config, run_scenario

ACCEPTANCE_LINES = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@functools.lru_cache(maxsize=None)
def preset_result(name: str):
    """Run a catalog preset once per session (no files written)."""
    return run_scenario(preset_config(name), write=False)


@pytest.fixture(scope="session")
def small_grid():
    return Grid2D(128, 32.0)


@pytest.fixture(scope="session")
def grid256():
    return Grid2D(256, 40.0)


@pytest.fixture
def ground(small_grid):
    return make_gaussian(small_grid, (0.0, 0.0), (0.0, 0.0), 1.0)


BATTERY = [
    ((0.0, 0.0), (0.0, 0.0), 1.0),
    ((3.0, -2.0), (0.5, 0.3), 1.0),
    ((-4.0, 1.0), (0.0, -1.0), 1.2),
    ((2.0, 5.0), (-0.8, 0.2), 0.8),
    ((0.0, -3.0), (1.0, 1.0), 1.5),
]


def random_battery(n: int, seed: int = 0, q_range: float = 3.0, p_range: float = 1.0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        out.append((tuple(rng.uniform(-q_range, q_range, 2)), tuple(rng.uniform(-p_range, p_range, 2)),
                    float(rng.uniform(0.8, 1.4))))
    return out
