import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from bilateral_pricing import (DriverQuery, RateModel, driver_gap_borrow, driver_gap_mixed, f_b,
                               f_l, f_tilde, g, g_c, g_h, g_variants)
from bilateral_pricing.errors import DomainError

RATES = RateModel.constant(0.01, 0.05, 0.03)
FUNDED = RateModel.constant(0.01, 0.05, 0.06)
money = st.floats(-1e3, 1e3, allow_nan=False)
rate = st.floats(0.0, 0.2)


def q(y, zs, x=0.0, t=0.0):
    # spot 1 so that z equals the dollar position z S
    return DriverQuery(t=t, s=1.0, y=y, z=zs, x=x)


@pytest.mark.parametrize("fn, y, zs, expected", [
    (f_l, 0.0, 0.0, 0.0),
    (f_l, 100.0, 50.0, 0.0),
    (f_l, -2.0, 1.0, -0.12),
    (f_b, 0.0, 0.0, 0.0),
    (f_b, -2.0, 1.0, -0.08),
    (g, 0.0, 0.0, 0.0),
    (g, 10.0, 5.0, -0.05),
    (g, -3.0, -4.0, 0.01),
])
def test_generator_values(fn, y, zs, expected):
    np.testing.assert_allclose(fn(q(y, zs), RATES), expected, atol=1e-15)


def test_zs_uses_the_spot():
    a = f_l(DriverQuery(0.0, 50.0, -2.0, 0.02), RATES)
    np.testing.assert_allclose(a, -0.12, atol=1e-15)


def test_equal_rates_collapse():
    r = RateModel.constant(0.03, 0.03, 0.03)
    np.testing.assert_allclose(f_b(q(4.0, -10.0), r), 0.12, atol=1e-15)
    ys, zs = np.linspace(-50, 50, 11), np.linspace(-20, 20, 11)
    np.testing.assert_allclose(f_tilde(DriverQuery(0.4, 1.0, ys, zs), r, "l"), 0.0, atol=1e-14)


def test_f_tilde_at_zero_time():
    np.testing.assert_allclose(f_tilde(q(0.0, 0.0), RATES, "l"), 0.0)
    np.testing.assert_allclose(f_tilde(q(-2.0, 1.0), RATES, "l"), -0.10, atol=1e-15)


def test_g_h_and_g_c_values():
    np.testing.assert_allclose(g_h(q(8.0, 5.0, x=2.0), RATES, 0.05), 0.18, atol=1e-15)
    # the hedge-return term beta z S = 0.05 comes on top of -g(t, 0, -z) = -0.01
    gc = g_c(q(0.0, 1.0, x=0.0), RATES, 0.05)
    np.testing.assert_allclose(gc - 0.05 * 1.0, -0.01, atol=1e-15)


def test_hl_tilde_value():
    np.testing.assert_allclose(g_variants(q(2.0, -4.0), RATES, 0.05, "hl_tilde"), -0.14, atol=1e-15)


@given(money, st.floats(-100, 100), st.floats(0.0, 1.0))
def test_generators_vanish_at_zero(x, zs_unused, t):
    for fn in (g_h, g_c):
        assert fn(q(0.0, 0.0, x=x, t=t), RATES, 0.05) == pytest.approx(0.0, abs=1e-12)


@given(money, money, money, st.floats(0.0, 1.0))
def test_counterparty_mirrors_hedger(x, y, zs, t):
    a = g_c(q(y, zs, x, t), RATES, 0.05)
    b = -g_h(q(-y, -zs, x, t), RATES, 0.05)
    np.testing.assert_allclose(a, b, atol=1e-9)


@given(money, money, money, money)
def test_g_lipschitz(y1, y2, z1, z2):
    lip = max(0.01, 0.05, 0.03)
    d = abs(g(q(y1, z1), RATES) - g(q(y2, z2), RATES))
    assert d <= lip * abs(y1 - y2) + (0.03 + 0.05) * abs(z1 - z2) + 1e-9


@given(money, money, money, st.floats(0.0, 100.0))
def test_g_h_nondecreasing_in_y(x, y, zs, dy):
    a = g_h(q(y, zs, x), RATES, 0.05)
    b = g_h(q(y + dy, zs, x), RATES, 0.05)
    assert b >= a - 1e-9


@given(money, money, st.floats(-1e3, 0.0))
def test_hl_tilde_ignores_x(y, zs, _):
    a = g_variants(q(y, zs, x=7.0), RATES, 0.05, "hl_tilde")
    b = g_variants(q(y, zs, x=0.0), RATES, 0.05, "hl_tilde")
    assert a == b


@given(st.floats(0.0, 1e3), st.floats(0.0, 1e3), money, st.floats(0.0, 1.0))
def test_hl_tilde_matches_hl_while_lending(x, y, zs, t):
    # with y >= 0 and x >= 0 the lending branch is active and the x terms cancel
    a = g_variants(q(y, zs, x, t), RATES, 0.05, "hl")
    b = g_variants(q(y, zs, x, t), RATES, 0.05, "hl_tilde")
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_gap_trivial_cases():
    assert driver_gap_borrow(0.0, 0.0, 0.0, 0.0, 0.0, FUNDED) == 0.0
    assert driver_gap_mixed(0.0, 0.0, 0.0, 0.0, 0.0, RATES) == 0.0
    np.testing.assert_allclose(driver_gap_mixed(0.0, 0.0, 1.0, 0.0, 0.0, RATES), -0.02, atol=1e-15)
    assert driver_gap_borrow(0.0, 0.0, 0.0, -1.0, -1.0, FUNDED) <= 0.0


def test_gap_borrow_preconditions():
    with pytest.raises(DomainError):
        driver_gap_borrow(0.0, 0.0, 0.0, 1.0, -1.0, FUNDED)
    with pytest.raises(DomainError):
        driver_gap_borrow(0.0, 0.0, 0.0, -1.0, -1.0, RATES)


@settings(max_examples=300)
@given(st.floats(0.0, 1.0), money, money, st.floats(-1e3, 0.0), st.floats(-1e3, 0.0),
       rate, st.floats(0.0, 0.2), st.floats(0.0, 0.2))
def test_gap_borrow_nonpositive(t, y, zs, x1, x2, rl, db, dib):
    r = RateModel.constant(rl, rl + db, rl + db + dib)
    assert driver_gap_borrow(t, y, zs, x1, x2, r) <= 1e-9


@settings(max_examples=300)
@given(st.floats(0.0, 1.0), money, money, money, st.booleans(),
       rate, st.floats(0.0, 0.2), st.floats(0.0, 0.2))
def test_gap_mixed_nonpositive(t, y, zs, x, first, rl, db, dib):
    r = RateModel.constant(rl, rl + db, rl + db + dib)
    x1, x2 = (x, 0.0) if first else (0.0, x)
    assert driver_gap_mixed(t, y, zs, x1, x2, r) <= 1e-9


def test_gap_mixed_vectorised_sample():
    rng = np.random.default_rng(3)
    n = 10_000
    t = rng.uniform(0, 1, n)
    y, zs = rng.normal(0, 20, n), rng.normal(0, 20, n)
    x = rng.normal(0, 5, n)
    first = rng.random(n) < 0.5
    gap = driver_gap_mixed(t, y, zs, np.where(first, x, 0.0), np.where(first, 0.0, x), FUNDED)
    assert gap.max() <= 1e-12


def test_gap_mixed_positive_when_both_endowments_nonzero():
    rng = np.random.default_rng(0)
    y, zs = rng.normal(0, 2, 10_000), rng.normal(0, 2, 10_000)
    assert driver_gap_mixed(0.0, y, zs, 1.0, -1.0, FUNDED).max() > 0.0


def test_gap_mixed_needs_cheap_borrowing_below_stock_funding():
    # with r_ib < r_b a stock position funded from the borrowing account breaks the bound
    a = 1.0
    gap = driver_gap_mixed(0.0, 0.0, a, 0.0, -a, RATES)
    np.testing.assert_allclose(gap, (0.05 - 0.03) * a, atol=1e-15)
