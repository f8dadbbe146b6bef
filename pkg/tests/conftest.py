import pytest

from lanechange.cli import bundled_scenario
from lanechange.grid import RoadGrid


@pytest.fixture
def grid():
    return RoadGrid()


@pytest.fixture
def scenario1_path():
    return bundled_scenario("scenario1")


@pytest.fixture
def scenario2_path():
    return bundled_scenario("scenario2")
