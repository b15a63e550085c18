import numpy as np
import pytest
from scipy.stats import norm

from bilateral_pricing import AssetModel, RateModel


def bs_call(s, K, r, vol, T):
    d1 = (np.log(s / K) + (r + 0.5 * vol ** 2) * T) / (vol * np.sqrt(T))
    d2 = d1 - vol * np.sqrt(T)
    return s * norm.cdf(d1) - K * np.exp(-r * T) * norm.cdf(d2)


def bs_delta(s, K, r, vol, T):
    d1 = (np.log(s / K) + (r + 0.5 * vol ** 2) * T) / (vol * np.sqrt(T))
    return norm.cdf(d1)


@pytest.fixture
def rates():
    """Lending 1%, borrowing 5%, stock funding 3%."""
    return RateModel.constant(0.01, 0.05, 0.03)


@pytest.fixture
def funded_rates():
    """Rates with r_l <= r_b <= r_ib."""
    return RateModel.constant(0.01, 0.05, 0.06)


@pytest.fixture
def flat_rates():
    return RateModel.constant(0.03, 0.03, 0.03)


@pytest.fixture
def asset():
    return AssetModel.lognormal(100.0, 0.2)
