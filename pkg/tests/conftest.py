import math

import pytest

from nucdecay.couplings import ChainGeometry, DecayParameters


@pytest.fixture(scope="session")
def fe57():
    return DecayParameters.fe57()


@pytest.fixture(scope="session")
def geom_5mrad():
    return ChainGeometry(incidence_angle=5e-3)


@pytest.fixture(scope="session")
def geom_50mrad():
    return ChainGeometry(incidence_angle=50e-3)


@pytest.fixture(scope="session")
def geom_no_step():
    """Perpendicular incidence: phase step numerically zero."""
    return ChainGeometry(incidence_angle=math.pi / 2)
