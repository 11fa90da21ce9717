import numpy as np
import pytest

from invreg import (
    SpectralSynthetic,
    cosine_basis,
    discretize_operator,
    midpoint_grid,
)


@pytest.fixture(scope="session")
def op_p1_d4_n16():
    """Spectral-synthetic p=1 operator, d=4, on the exact cosine design."""
    return discretize_operator(SpectralSynthetic(p=1.0), cosine_basis(),
                               midpoint_grid(16), 4)


@pytest.fixture(scope="session")
def identity_op_d4_n16():
    return discretize_operator("identity", cosine_basis(), midpoint_grid(16), 4)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240831)
