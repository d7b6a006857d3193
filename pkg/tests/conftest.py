import sys
from pathlib import Path

import pytest

from macstab.coding import CodingConfig
from macstab.regions import enumerate_schedules

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def single():
    """One transmitter, binary alphabet, P = 3 sigma^2, rho = 1, pe = 0.01."""
    return CodingConfig(M=(2,), P=(3.0,), sigma2=1.0, rho=1.0, pe=0.01)


@pytest.fixture
def pair():
    return CodingConfig(M=(2, 2), P=(3.0, 3.0), sigma2=1.0, rho=1.0, pe=0.01)


@pytest.fixture
def single_catalog(single):
    return enumerate_schedules(1, 1, single)
