import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dilatox.core import ModelDomain
from dilatox.models import (
    EuclideanModel,
    HeisenbergModel,
    SphereModel,
    make_dilatation_structure,
    random_step2,
)

settings.register_profile(
    "suite",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

# Roomy domain for the 1-d vector-space worked examples, whose points sit
# farther apart than the default closeness radius.
WIDE = ModelDomain(inner=8.0, outer=1.5, closeness=8.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240612)


@pytest.fixture(scope="session")
def euclid1():
    return make_dilatation_structure(EuclideanModel(1), WIDE)


@pytest.fixture(scope="session")
def euclid2():
    return make_dilatation_structure(EuclideanModel(2))


@pytest.fixture(scope="session")
def heis():
    return make_dilatation_structure(HeisenbergModel())


@pytest.fixture(scope="session")
def step2():
    return make_dilatation_structure(random_step2(3, 2, seed=7))


@pytest.fixture(scope="session")
def sphere():
    return make_dilatation_structure(SphereModel())


@pytest.fixture(scope="session")
def group_structures(euclid2, heis, step2):
    return {"euclidean": euclid2, "heisenberg": heis, "step2": step2}
