import numpy as np
import pytest

from cohomq.curvature import yamabe_coefficients
from cohomq.geometry import make_sphere
from cohomq.koiso_cao import solve_soliton
from cohomq.partition import energy_table


@pytest.fixture(scope="session")
def soliton():
    return solve_soliton(step=1e-3)


@pytest.fixture(scope="session")
def soliton_fine():
    return solve_soliton(step=1e-4)


@pytest.fixture(scope="session")
def sphere33():
    return make_sphere(3, 3)


@pytest.fixture(scope="session")
def yamabe33(sphere33):
    return yamabe_coefficients(sphere33)


@pytest.fixture(scope="session")
def table33(sphere33, yamabe33):
    return energy_table(sphere33, yamabe33, None, 24, n=200)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
