import math

import numpy as np
import pytest

from fracfga.grid import Grid, WaveField


def ex1d_field(eps, box=((0.0, 2.0),)):
    grid = Grid.uniform(box, eps)
    x = grid.axes[0]
    return WaveField(grid, math.sqrt(64 / math.pi) * np.exp(-64 * (x - 1) ** 2) * np.exp(1j * x / eps))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def report(name, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
