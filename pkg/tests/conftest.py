import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from biyb.algebra import build_cartan_weyl, canonical_R
from biyb.model import BiYBModel

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(params=[2, 3], ids=["su2", "su3"])
def basis(request):
    return build_cartan_weyl(request.param)


@pytest.fixture
def su2():
    return build_cartan_weyl(2)


@pytest.fixture
def su3():
    return build_cartan_weyl(3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def R(basis):
    return canonical_R(basis)


@pytest.fixture
def model2():
    return BiYBModel.su(2, 0.3, 0.2)
