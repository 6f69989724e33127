import numpy as np
import pytest

from boltzsoft.collision import CollisionQuadrature
from boltzsoft.phase_space import KernelParams, SphereQuadrature, VelocityGrid


@pytest.fixture(scope="session")
def params():
    return KernelParams()


@pytest.fixture(scope="session")
def sphere():
    return SphereQuadrature(8)


@pytest.fixture(scope="session")
def grid9():
    return VelocityGrid(8.0, 9)


@pytest.fixture(scope="session")
def grid13():
    return VelocityGrid(8.0, 13)


@pytest.fixture(scope="session")
def quad9(grid9, sphere, params):
    return CollisionQuadrature(grid9, sphere, params)


@pytest.fixture(scope="session")
def quad13(grid13, sphere, params):
    return CollisionQuadrature(grid13, sphere, params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
