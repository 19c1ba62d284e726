import numpy as np
import pytest

from slipflow.fem import build_space
from slipflow.meshing import build_unit_square


@pytest.fixture(scope="session")
def space2():
    return build_space(build_unit_square(2))


@pytest.fixture(scope="session")
def space4():
    return build_space(build_unit_square(4))


@pytest.fixture(scope="session")
def space8():
    return build_space(build_unit_square(8))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
