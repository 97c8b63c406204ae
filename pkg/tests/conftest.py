import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import helpers  # noqa: E402


@pytest.fixture(scope="session")
def sphere48():
    return helpers.sphere_band(48)


@pytest.fixture(scope="session")
def catenoid48():
    return helpers.catenoid_band(48)


@pytest.fixture(scope="session")
def plane33():
    return helpers.flat_patch(33)


@pytest.fixture(scope="session")
def torus48():
    return helpers.torus_surface(48)


@pytest.fixture(scope="session")
def circle96():
    return helpers.great_circle(96)


@pytest.fixture(scope="session")
def cylinder48():
    return helpers.cylinder_band(48)
