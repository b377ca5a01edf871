import numpy as np
import pytest

from fieldkde import CoefficientModel, InnovationModel, kernel_by_name

MASTER_SEED = 20260810


@pytest.fixture(scope="session")
def geometric_half():
    return CoefficientModel(d=1, family="geometric", ratio=0.5)


@pytest.fixture(scope="session")
def identity_weights():
    return CoefficientModel(d=1, family="finite_support", table=np.array([1.0]))


@pytest.fixture(scope="session")
def power_d2():
    return CoefficientModel(d=2, family="power_decay", q=4.0)


@pytest.fixture(scope="session")
def gaussian_innov():
    return InnovationModel("gaussian")


@pytest.fixture(scope="session")
def epanechnikov():
    return kernel_by_name("epanechnikov")
