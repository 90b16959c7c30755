import numpy as np
import pytest

from momentflow import oracle as orc


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def space50():
    # shared mid-size basis for unit tests; acceptance uses its own D=60
    return orc.FockSpace(50, 1.0, 1.0, 1.0)
