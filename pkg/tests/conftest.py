import pytest

from coarselab import spaces


@pytest.fixture(scope="session")
def zline():
    return spaces.make_window("zd", 16, 6, dim=1)


@pytest.fixture(scope="session")
def zplane():
    return spaces.make_window("zd", 10, 4, dim=2)


@pytest.fixture(scope="session")
def heis():
    return spaces.make_window("heisenberg3", 5, 1)


@pytest.fixture(scope="session")
def tree():
    return spaces.make_window("tree3", 6, 1)
