import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from radreact.core import Grid1D, eigenstates, soft_coulomb  # noqa: E402


@pytest.fixture(scope="session")
def grid():
    return Grid1D(301, 0.1)


@pytest.fixture(scope="session")
def potential(grid):
    return soft_coulomb(grid, 1.0)


@pytest.fixture(scope="session")
def eig(grid, potential):
    return eigenstates(potential, grid, 7)


@pytest.fixture(scope="session")
def superposition(eig):
    return ((eig.states[0] + eig.states[1]) / np.sqrt(2.0)).astype(complex)
