import numpy as np
import pytest

from shiftnas import default_space, generate_synthetic, init_supernet


@pytest.fixture(scope="session")
def tiny_space():
    return default_space("tiny")


@pytest.fixture(scope="session")
def standard_space():
    return default_space("standard")


@pytest.fixture(scope="session")
def blobs_easy():
    return generate_synthetic("blobs-easy", seed=7)


@pytest.fixture(scope="session")
def rings():
    return generate_synthetic("rings", seed=7)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture()
def tiny_net(tiny_space):
    return init_supernet(tiny_space, seed=5)
