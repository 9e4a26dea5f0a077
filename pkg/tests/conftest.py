import numpy as np
import pytest

from tiltopt.experiments import pair_scenario, smooth_scenario
from tiltopt.model import cluster_scenario, fairness_scenario


@pytest.fixture(scope="session")
def pair_net():
    return pair_scenario(seed=0)


@pytest.fixture(scope="session")
def smooth_net():
    return smooth_scenario(seed=0)


@pytest.fixture(scope="session")
def cluster_net():
    return cluster_scenario(seed=0)


@pytest.fixture(scope="session")
def fairness_net():
    return fairness_scenario(seed=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
