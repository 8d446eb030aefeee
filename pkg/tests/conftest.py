import numpy as np
import pytest

from masterop import QuadSpec, kernel_constants


@pytest.fixture(scope="session")
def p_half():
    """Normalized kernel parameters at n=1, s=1/2."""
    return kernel_constants(1, 0.5)


@pytest.fixture(scope="session")
def q_default():
    return QuadSpec()


@pytest.fixture(scope="session")
def q_horizon():
    """Spec for functions without a support box (decaying pasts)."""
    return QuadSpec(horizon=60.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0xA11CE)
