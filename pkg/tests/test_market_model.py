import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilateral_pricing import (AssetModel, CollateralSpec, Contract, PiecewiseConstant, RateModel,
                               account_value, effective_stream, validate_model)
from bilateral_pricing.errors import DomainError
from bilateral_pricing.market_model import collateral_funding_cost, time_grid, trivial_wealth


def test_account_values():
    r = RateModel.constant(0.01, 0.05)
    assert account_value(r, "lend", 0.0) == 1.0
    np.testing.assert_allclose(account_value(r, "lend", 0.5), 1.0050125, atol=1e-7)
    np.testing.assert_allclose(account_value(r, "borrow", 1.0), 1.0512711, atol=1e-7)


def test_account_outside_horizon():
    r = RateModel.constant(0.01, 0.05)
    with pytest.raises(DomainError):
        account_value(r, "lend", 1.5)
    with pytest.raises(DomainError):
        account_value(r, "lend", -0.1)


def test_piecewise_integral():
    c = PiecewiseConstant([(0.0, 0.01), (0.5, 0.03)])
    assert c(0.25) == 0.01 and c(0.5) == 0.03
    np.testing.assert_allclose(c.integral(0.0, 1.0), 0.5 * 0.01 + 0.5 * 0.03)
    np.testing.assert_allclose(c.integral(0.25, 0.75), 0.25 * 0.01 + 0.25 * 0.03)
    r = RateModel(c, 0.05, 0.05, 0.0, 1.0)
    np.testing.assert_allclose(account_value(r, "lend", 1.0), np.exp(0.02))


def test_piecewise_rejects_late_start():
    with pytest.raises(DomainError):
        PiecewiseConstant([(0.1, 0.01)])


@given(st.lists(st.tuples(st.floats(0.01, 0.99), st.floats(0.0, 0.2)), max_size=5),
       st.floats(0.0, 0.2), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_account_is_multiplicative(knots, r0, a, b):
    starts = sorted({round(t, 6) for t, _ in knots})
    curve = PiecewiseConstant([(0.0, r0)] + [(t, v) for t, (_, v) in zip(starts, knots)])
    r = RateModel(curve, 1.0, 1.0, 0.0, 1.0)
    lo, hi = min(a, b), max(a, b)
    ratio = account_value(r, "lend", hi) / account_value(r, "lend", lo)
    np.testing.assert_allclose(ratio, np.exp(curve.integral(lo, hi)), rtol=1e-12)
    assert account_value(r, "lend", hi) >= account_value(r, "lend", lo)


def test_collateral_funding_cost():
    r = RateModel.constant(0.01, 0.05, r_c=0.02)
    assert collateral_funding_cost(CollateralSpec.zero(), r, 100.0, 1.0) == 0.0
    np.testing.assert_allclose(collateral_funding_cost(CollateralSpec.constant(2.0, 1.0), r, 100.0, 1.0), -0.04)
    np.testing.assert_allclose(collateral_funding_cost(CollateralSpec.constant(-2.0, 1.0), r, 100.0, 1.0), 0.04)


def test_collateral_returned_at_maturity():
    C = CollateralSpec.constant(2.0, 1.0)
    assert C(0.5, np.array([1.0]))[0] == 2.0
    assert C(1.0, np.array([1.0]))[0] == 0.0
    assert C.running(1.0, np.array([1.0]))[0] == 2.0


def test_stream_monotonicity(rates):
    flat = effective_stream(Contract(p=3.0), CollateralSpec.zero(), rates)
    assert flat.decreasing and flat.increasing
    down = effective_stream(Contract(dated_flows=((0.5, -1.0),)), CollateralSpec.zero(), rates)
    assert down.decreasing and not down.increasing
    up = effective_stream(Contract(dated_flows=((0.5, 0.5),)), CollateralSpec.zero(), rates)
    assert up.increasing and not up.decreasing
    short_call = effective_stream(Contract(payoff=lambda s: np.maximum(s - 100.0, 0.0)),
                                  CollateralSpec.zero(), rates)
    assert short_call.decreasing


def test_stream_antisymmetry(rates):
    c = Contract(p=1.0, dated_flows=((0.3, lambda s: 0.1 * s),), continuous=lambda t, s: 0.01 * s,
                 payoff=lambda s: np.maximum(s - 90.0, 0.0))
    C = CollateralSpec(lambda t, s: 0.2 * s, 1.0)
    a, b = effective_stream(c, C, rates), effective_stream(c, C, rates).negated()
    spots = np.linspace(1.0, 300.0, 17)
    for x, y in zip(a.increments(spots, 40), b.increments(spots, 40)):
        np.testing.assert_allclose(y, -x, atol=1e-15)


def test_validate_model_messages():
    asset = AssetModel.lognormal(100.0, 0.2)
    assert validate_model(RateModel.constant(0.01, 0.05), asset) == []
    assert "r_l ≤ r_b" in validate_model(RateModel.constant(0.05, 0.01), asset)
    bad_c = CollateralSpec(1.0, None)
    assert "C_T = 0" in validate_model(RateModel.constant(0.01, 0.05), asset, Contract(), bad_c)
    low_beta = asset.with_beta(0.03)
    assert "r_b ≤ beta" in validate_model(RateModel.constant(0.01, 0.05), low_beta)


def test_validate_contract_flow_times(rates, asset):
    c = Contract(dated_flows=((0.6, 1.0), (0.4, 1.0)))
    assert "flow times strictly increasing" in validate_model(rates, asset, c)
    c = Contract(dated_flows=((1.5, 1.0),))
    assert "flow times in (0, T]" in validate_model(rates, asset, c)


def test_trivial_wealth():
    r = RateModel.constant(0.01, 0.05)
    np.testing.assert_allclose(trivial_wealth(r, 2.0), 2.0 * np.exp(0.01))
    np.testing.assert_allclose(trivial_wealth(r, -2.0), -2.0 * np.exp(0.05))


def test_time_grid_contains_breakpoints():
    g = time_grid(1.0, 10, [0.33, 0.5])
    assert g[0] == 0.0 and g[-1] == 1.0
    assert np.any(np.isclose(g, 0.33)) and np.any(np.isclose(g, 0.5))
    assert np.all(np.diff(g) > 0.0)
