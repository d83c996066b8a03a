import numpy as np
import pytest

from orlicz_duality import market, utility


@pytest.fixture
def binomial():
    return market.FiniteMarket([0.5, 0.5], (market.Generator([1.0, -1.0], True),))


@pytest.fixture
def skewed_binomial():
    return market.FiniteMarket([2 / 3, 1 / 3], (market.Generator([1.0, -1.0], True),))


@pytest.fixture
def exp_u():
    return utility.exponential()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
