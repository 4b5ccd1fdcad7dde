import numpy as np
import pytest

from app import group_core, multiplier
from app.models import QuadratureSpec

GENERIC_A = np.diag([0.5, 0.5, 0.0])


@pytest.fixture
def h1():
    return group_core.heisenberg(1)


@pytest.fixture
def h2():
    return group_core.heisenberg(2)


@pytest.fixture
def group43():
    return group_core.metivier_4_3(GENERIC_A)


@pytest.fixture
def bump():
    return multiplier.smooth_bump(1.0, 3.0)


@pytest.fixture
def quad():
    return QuadratureSpec.default()
