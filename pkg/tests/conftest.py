import numpy as np
import pytest

from pismle.models import get_model
from pismle.rng import stream


@pytest.fixture
def ar1():
    return get_model("ar1")


@pytest.fixture
def ar1_optimal():
    return get_model("ar1", "optimal")


@pytest.fixture
def theta_ar1(ar1):
    return ar1.parameter([0.7, 0.7, 1.0])


@pytest.fixture
def y_short(ar1, theta_ar1):
    return ar1.simulate(theta_ar1, 30, stream(101, "data"))


@pytest.fixture
def y_tiny(ar1, theta_ar1):
    return ar1.simulate(theta_ar1, 5, stream(102, "data"))


def random_theta(model, rng):
    """Draw a valid interior parameter for any of the five models."""
    if model.model_id == "par1":
        mu = rng.uniform(-0.5, 0.5, 6)
        return model.parameter(
            np.concatenate([mu, [rng.uniform(-0.9, 0.9), rng.uniform(0.2, 1.5)]])
        )
    return model.parameter(
        [rng.uniform(-0.9, 0.9), rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5)]
    )
