import numpy as np
import pytest

from bilateral_pricing import (AssetModel, CollateralSpec, Contract, GridSpec, RateModel,
                               arbitrage_diagnostic, cash_price, extract_strategy, netted_wealth_U,
                               price_at, simulate_paths, simulate_replication, solve_hedger_pde)
from bilateral_pricing.errors import DomainError
from conftest import bs_delta

CALL = Contract(payoff=lambda s: np.maximum(s - 100.0, 0.0))
PUT = Contract(payoff=lambda s: np.maximum(100.0 - s, 0.0))
ZERO_C = CollateralSpec.zero()
GRID = GridSpec.around(100.0, 201, 200)


def test_zero_snapshot(rates, asset):
    surf = solve_hedger_pde(rates, asset, Contract(), ZERO_C, 0.0, GridSpec.around(100.0, 41, 20))
    snap = extract_strategy(surf, rates, None, 0.0, 0.0, 100.0)
    for v in vars(snap).values():
        assert v == 0.0


def test_call_snapshot(flat_rates, asset):
    surf = solve_hedger_pde(flat_rates, asset, CALL, ZERO_C, 0.0, GRID)
    snap = extract_strategy(surf, flat_rates, None, 0.0, 0.0, 100.0)
    assert 0.0 < snap.xi < 1.0
    np.testing.assert_allclose(snap.xi, bs_delta(100.0, 100.0, 0.03, 0.2, 1.0), atol=2e-3)
    np.testing.assert_allclose(snap.psi_ib, -snap.xi * 100.0)
    np.testing.assert_allclose(snap.psi_l, max(price_at(surf, 0.0, 100.0), 0.0))
    assert snap.psi_b == 0.0


def test_put_snapshot_with_endowment(rates, asset):
    surf = solve_hedger_pde(rates, asset, PUT, ZERO_C, 5.0, GRID)
    snap = extract_strategy(surf, rates, None, 5.0, 0.0, 100.0)
    v = surf.sample("v_ex", 0.0, 100.0)
    assert snap.xi < 0.0
    np.testing.assert_allclose(snap.psi_l, v + 5.0 + abs(snap.xi) * 100.0)
    assert snap.psi_b == 0.0 and snap.psi_ib == 0.0


@pytest.mark.parametrize("x", [0.0, 2.0])
def test_zero_contract_replication(rates, asset, x):
    surf = solve_hedger_pde(rates, asset, Contract(), ZERO_C, x, GridSpec.around(100.0, 41, 20))
    times, S = simulate_paths(asset, rates, 5, 50, np.random.default_rng(0))
    wp = simulate_replication(surf, rates, asset, Contract(), None, x, (times, S))
    np.testing.assert_allclose(wp.V[:, -1], x * np.exp(0.01), rtol=1e-12)
    np.testing.assert_allclose(wp.e_T, 0.0, atol=1e-12)


def test_replication_error_shrinks(flat_rates, asset):
    surf = solve_hedger_pde(flat_rates, asset, CALL, ZERO_C, 0.0, GridSpec.around(100.0, 401, 400))
    errs = []
    for n in (25, 50, 100):
        times, S = simulate_paths(asset, flat_rates, 400, n, np.random.default_rng(n))
        S = np.clip(S, 0.0, 400.0)
        wp = simulate_replication(surf, flat_rates, asset, CALL, None, 0.0, (times, S), scheme="milstein")
        errs.append(np.mean(np.abs(wp.e_T)))
    assert errs[0] > errs[1] > errs[2]


def test_path_outside_hull(rates, asset):
    surf = solve_hedger_pde(rates, asset, CALL, ZERO_C, 0.0, GridSpec.around(100.0, 41, 20))
    with pytest.raises(DomainError):
        simulate_replication(surf, rates, asset, CALL, None, 0.0, (np.array([0.0, 1.0]), np.array([100.0, 900.0])))


def test_netted_wealth_closed_forms():
    r = RateModel.constant(0.01, 0.05)
    u = netted_wealth_U(Contract(p=3.0), ZERO_C, r, 0.01)
    np.testing.assert_allclose(u.U[-1], -3.0 * np.exp(0.05), rtol=1e-12)
    np.testing.assert_allclose(u.U[-1], -3.153813, atol=1e-6)
    np.testing.assert_allclose(u.U, -3.0 * np.exp(0.05 * u.times), rtol=1e-12)
    u = netted_wealth_U(Contract(p=-3.0), ZERO_C, r, 0.01)
    np.testing.assert_allclose(u.U[-1], 3.0 * np.exp(0.01), rtol=1e-12)
    assert np.all(netted_wealth_U(Contract(), ZERO_C, r, 0.1).U == 0.0)


def test_netted_wealth_sign_change():
    # p = 1 out, then 2 in at t = 0.5: U = -e^{0.05 t} before, then lends the remainder
    r = RateModel.constant(0.01, 0.05)
    u = netted_wealth_U(Contract(p=1.0, dated_flows=((0.5, -2.0),)), ZERO_C, r, 0.1)
    expected = (2.0 - np.exp(0.025)) * np.exp(0.01 * 0.5)
    np.testing.assert_allclose(u.U[-1], expected, rtol=1e-12)


def test_cash_price_single_inflow():
    r = RateModel.constant(0.01, 0.05)
    c = Contract(dated_flows=((0.5, 0.5),))
    np.testing.assert_allclose(cash_price(c, ZERO_C, r, 1.0, "hedger"), -0.5 * np.exp(-0.005), atol=1e-12)
    np.testing.assert_allclose(cash_price(c, ZERO_C, r, -1.0, "counterparty"), -0.5 * np.exp(-0.025), atol=1e-12)


def test_arbitrage_zero_contract(rates, asset):
    surf = solve_hedger_pde(rates, asset, Contract(), ZERO_C, 0.0, GridSpec.around(100.0, 41, 20))
    paths = simulate_paths(asset, rates, 4, 20, np.random.default_rng(1))
    rep = arbitrage_diagnostic(Contract(), ZERO_C, rates, asset, surf, paths, 0.0)
    assert np.all(rep.max_violation == 0.0) and not rep.flagged


def test_arbitrage_single_inflow_at_fair_and_mispriced_prices(asset):
    r = RateModel.constant(0.01, 0.05)
    c = Contract(dated_flows=((0.5, 0.5),))
    surf = solve_hedger_pde(r, asset, c, ZERO_C, 1.0, GridSpec.around(100.0, 41, 100))
    ph = price_at(surf, 0.0, 100.0)
    viol = []
    for n in (50, 100):
        paths = simulate_paths(asset, r, 3, n, np.random.default_rng(2))
        viol.append(arbitrage_diagnostic(c, ZERO_C, r, asset, surf, paths, 1.0).max_violation.max())
    assert viol[1] <= viol[0] + 1e-15 and viol[1] < 1e-3
    spread = abs(-0.5 * np.exp(-0.025) - ph)
    paths = simulate_paths(asset, r, 3, 50, np.random.default_rng(3))
    rep = arbitrage_diagnostic(c, ZERO_C, r, asset, surf, paths, 1.0, traded_price=ph + 2.0 * spread)
    assert rep.flagged and np.all(rep.terminal_excess > 0.0)
