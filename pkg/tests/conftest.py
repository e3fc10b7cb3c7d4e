import numpy as np
import pytest

from corrheston.blackscholes import SmileQuote
from corrheston.model_core import symmetric_params

# smile-study parameter set used across the suite: S=100, r=q=0, T=0.25,
# theta=0.01, alpha=0.3, beta=2, centered correlation range
SPOT = 100.0
TAU = 0.25


def smile_params(eta, rho_bar=0.0):
    return symmetric_params(theta=0.01, alpha=0.3, beta=2.0, rho_bar=rho_bar, eta=eta)


@pytest.fixture
def example_quote():
    """The 3m example market: ATM 8%, RR +1%, BF +0.5%."""
    return SmileQuote(tenor=0.25, atm_vol=0.08, rr25=0.01, bf25=0.005)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
