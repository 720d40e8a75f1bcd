import pytest

from unduloid.family import SlabConfig
from unduloid.quadrature import DEFAULT_SPEC, ORACLE_SPEC


@pytest.fixture(scope="session")
def cfg8():
    return SlabConfig(8)


@pytest.fixture(scope="session")
def cfg11():
    return SlabConfig(11)


@pytest.fixture(scope="session")
def cfg3():
    return SlabConfig(3)


@pytest.fixture(scope="session")
def de():
    return DEFAULT_SPEC


@pytest.fixture(scope="session")
def gauss():
    return ORACLE_SPEC
