import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bioflux.grid import Faces, Grid

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def unit16():
    return Grid(16, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_solenoidal(grid, rng, amp=1.0):
    """Divergence-free face field with zero wall normals, from a random corner stream function."""
    psi = np.zeros((grid.ny + 1, grid.nx + 1))
    psi[1:-1, 1:-1] = rng.standard_normal((grid.ny - 1, grid.nx - 1))
    u = Faces(np.diff(psi, axis=0) / grid.dy, -np.diff(psi, axis=1) / grid.dx)
    return u.scaled(amp / u.max_abs())


# acceptance verdict lines, echoed in the terminal summary
ACCEPTANCE = {}


def verdict(number, title, ok, detail=""):
    line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {title}" + (f": {detail}" if detail else "")
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
