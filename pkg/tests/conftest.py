import numpy as np
import pytest

from ttoption.tt import TensorTrain


def random_tt(rng, dims, chis, scale=1.0):
    """Random complex TT with the given local dims and inner bonds."""
    full = [1, *chis, 1]
    cores = []
    for i, n in enumerate(dims):
        shape = (full[i], n, full[i + 1])
        cores.append(scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)))
    return TensorTrain(cores)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
