import os

# single-threaded BLAS is faster at these kernel sizes and keeps timings
# stable; must be set before numpy loads
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np
import pytest

from dualdimer.diffnet import NetSpec, init_params
from dualdimer.heat import sample_training_data, solve_heat
from dualdimer.pcnn import build_sample_plan


@pytest.fixture(scope="session")
def heat_field():
    return solve_heat(101, 5e-4)


@pytest.fixture(scope="session")
def heat_dataset(heat_field):
    return sample_training_data(heat_field)


@pytest.fixture(scope="session")
def heat_plan(heat_dataset):
    return build_sample_plan(heat_dataset)


@pytest.fixture()
def tiny_net():
    """Small (3 -> 5 -> 4 -> 1) network with nonzero biases."""
    spec = NetSpec(input_dim=3, hidden_sizes=(5, 4))
    params = init_params(spec, 7)
    rng = np.random.default_rng(11)
    for b in params.biases:
        b[:] = rng.normal(0.0, 0.3, b.shape)
    return spec, params
