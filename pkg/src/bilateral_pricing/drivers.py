"""BSDE generators for funding with partial netting.

All functions are exact piecewise-linear evaluations with no smoothing.
Arguments may be numpy arrays. With one asset, ``z`` and ``s`` broadcast
elementwise. With several assets, the last axis of ``z`` and ``s`` indexes
the assets.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .market_model import AssetModel, PiecewiseConstant, RateModel, account_value


def pos(a):
    return np.maximum(a, 0.0)


def neg(a):
    return np.maximum(-a, 0.0)


@dataclass(frozen=True)
class DriverQuery:
    """Arguments of a generator: time, spot(s), wealth level y, hedge z and endowment x."""

    t: float
    s: np.ndarray | float
    y: np.ndarray | float
    z: np.ndarray | float
    x: float = 0.0

    def with_(self, **kw) -> "DriverQuery":
        return replace(self, **kw)


def _zs(q: DriverQuery, rates: RateModel) -> np.ndarray:
    zs = np.asarray(q.z, dtype=float) * np.asarray(q.s, dtype=float)
    return zs


def _sum_assets(a, rates: RateModel):
    return np.sum(a, axis=-1) if rates.n_assets > 1 else a


def _ib(q: DriverQuery, rates: RateModel):
    return rates.ib(q.t) if rates.n_assets > 1 else rates.r_ib[0](q.t)


def _funding_block(t, y, zs, rates: RateModel, r_ib):
    """-sum r_ib (zS)+ + r_l (y + sum (zS)-)+ - r_b (y + sum (zS)-)-."""
    short = _sum_assets(neg(zs), rates)
    w = np.asarray(y, dtype=float) + short
    return (-_sum_assets(r_ib * pos(zs), rates)
            + rates.r_l(t) * pos(w) - rates.r_b(t) * neg(w))


def g(q: DriverQuery, rates: RateModel):
    """Funding generator without the leading hedge-return term."""
    return _funding_block(q.t, q.y, _zs(q, rates), rates, _ib(q, rates))


def f_l(q: DriverQuery, rates: RateModel):
    zs = _zs(q, rates)
    return rates.r_l(q.t) * _sum_assets(zs, rates) + g(q, rates)


def f_b(q: DriverQuery, rates: RateModel):
    zs = _zs(q, rates)
    return rates.r_b(q.t) * _sum_assets(zs, rates) + g(q, rates)


def f_tilde(q: DriverQuery, rates: RateModel, variant: str = "l"):
    """Generator of the wealth discounted by B^l (variant 'l') or B^b ('b')."""
    if variant == "l":
        kind, f, r = "lend", f_l, rates.r_l(q.t)
    elif variant == "b":
        kind, f, r = "borrow", f_b, rates.r_b(q.t)
    else:
        raise DomainError(f"unknown variant {variant!r}")
    B = account_value(rates, kind, q.t)
    y = np.asarray(q.y, dtype=float)
    return f(q.with_(y=B * y), rates) / B - r * y


def _beta(beta, t, rates: RateModel):
    if isinstance(beta, AssetModel):
        return beta.beta_at(t, rates)
    if beta is None:
        return rates.r_b(t)
    if isinstance(beta, PiecewiseConstant):
        return beta(t)
    return np.asarray(beta, dtype=float)


def _hedge_return(q: DriverQuery, rates: RateModel, beta):
    return _sum_assets(_beta(beta, q.t, rates) * _zs(q, rates), rates)


def _hedger_branch(q: DriverQuery, rates: RateModel, kind: str):
    r = rates.r_l(q.t) if kind == "lend" else rates.r_b(q.t)
    B = account_value(rates, kind, q.t)
    y = np.asarray(q.y, dtype=float) + q.x * B
    return -q.x * r * B + g(q.with_(y=y), rates)


def _counterparty_branch(q: DriverQuery, rates: RateModel, kind: str):
    r = rates.r_l(q.t) if kind == "lend" else rates.r_b(q.t)
    B = account_value(rates, kind, q.t)
    y = -np.asarray(q.y, dtype=float) + q.x * B
    return q.x * r * B - g(q.with_(y=y, z=-np.asarray(q.z, dtype=float)), rates)


def g_h(q: DriverQuery, rates: RateModel, beta=None):
    """Hedger's generator; the branch follows the sign of the endowment x.

    ``beta`` may be an AssetModel, a curve, a number, or None for beta = r_b.
    """
    kind = "lend" if q.x >= 0 else "borrow"
    return _hedge_return(q, rates, beta) + _hedger_branch(q, rates, kind)


def g_c(q: DriverQuery, rates: RateModel, beta=None):
    """Counterparty's generator, the mirror image of g_h under (y, z) -> (-y, -z)."""
    kind = "lend" if q.x >= 0 else "borrow"
    return _hedge_return(q, rates, beta) + _counterparty_branch(q, rates, kind)


def g_variants(q: DriverQuery, rates: RateModel, beta=None, which: str = "hl"):
    """Single-branch generators: hl, cb, hb, cl and the x-free hl_tilde, cl_tilde."""
    if which == "hl":
        return _hedge_return(q, rates, beta) + _hedger_branch(q, rates, "lend")
    if which == "hb":
        return _hedge_return(q, rates, beta) + _hedger_branch(q, rates, "borrow")
    if which == "cl":
        return _hedge_return(q, rates, beta) + _counterparty_branch(q, rates, "lend")
    if which == "cb":
        return _hedge_return(q, rates, beta) + _counterparty_branch(q, rates, "borrow")
    zs = _zs(q, rates)
    r_ib, r_l = _ib(q, rates), rates.r_l(q.t)
    y = np.asarray(q.y, dtype=float)
    if which == "hl_tilde":
        return (_hedge_return(q, rates, beta) - _sum_assets(r_ib * pos(zs), rates)
                + r_l * y + r_l * _sum_assets(neg(zs), rates))
    if which == "cl_tilde":
        return (_hedge_return(q, rates, beta) + _sum_assets(r_ib * pos(-zs), rates)
                + r_l * y - r_l * _sum_assets(neg(-zs), rates))
    raise DomainError(f"unknown generator {which!r}")


def driver_gap_borrow(t, y, z, x1, x2, rates: RateModel, s=1.0):
    """f~_b(t, y + x1, z) + f~_b(t, -y + x2, -z); nonpositive when x1, x2 <= 0."""
    if np.any(np.asarray(x1) > 0) or np.any(np.asarray(x2) > 0):
        raise DomainError("both endowments must be nonpositive")
    if rates.violations():
        raise DomainError("rates violate " + ", ".join(rates.violations()))
    if not rates.strong_funding:
        raise DomainError("requires r_b ≤ r_ib")
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    a = f_tilde(DriverQuery(t, s, y + x1, z), rates, "b")
    b = f_tilde(DriverQuery(t, s, -y + x2, -z), rates, "b")
    return a + b


def driver_gap_mixed(t, y, z, x1, x2, rates: RateModel, s=1.0):
    """g(y + x1 B^l, z) + g(-y + x2 B^b, -z) - x1 r_l B^l - x2 r_b B^b.

    Nonpositive whenever x1 * x2 = 0 and r_b <= r_ib.
    """
    Bl = account_value(rates, "lend", t)
    Bb = account_value(rates, "borrow", t)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    a = g(DriverQuery(t, s, y + x1 * Bl, z), rates)
    b = g(DriverQuery(t, s, -y + x2 * Bb, -z), rates)
    return a + b - x1 * rates.r_l(t) * Bl - x2 * rates.r_b(t) * Bb
