"""Replicating strategies, forward wealth simulation and the netted wealth U."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .drivers import neg, pos
from .errors import DomainError
from .market_model import (AssetModel, CollateralSpec, Contract, RateModel, account_value,
                           effective_stream, endowment_value, time_grid, trivial_wealth)
from .pde_engine import ValueSurface

_EPS = 1e-12


def _side_sign(surface: ValueSurface) -> float:
    return 1.0 if surface.side == "hedger" else -1.0


def _endowment_account(rates: RateModel, x: float, t):
    return account_value(rates, "lend" if x >= 0 else "borrow", t)


@dataclass(frozen=True)
class StrategySnapshot:
    xi: np.ndarray | float
    psi_l: np.ndarray | float
    psi_b: np.ndarray | float
    psi_ib: np.ndarray | float
    eta_b: np.ndarray | float
    eta_l: np.ndarray | float


def extract_strategy(surface: ValueSurface, rates: RateModel, C: CollateralSpec | None,
                     x, t: float, s) -> StrategySnapshot:
    """Holdings at (t, s) of the party whose surface is given.

    The counterparty holds -delta shares and works with -v, since it faces
    the stream (-A, -C).
    """
    x = endowment_value(x)
    C = surface.collateral if C is None else C
    sign = _side_sign(surface)
    s = np.asarray(s, dtype=float)
    xi = sign * surface.sample("delta_ex", t, s)
    v = sign * surface.sample("v_ex", t, s)
    xs = xi * s
    w = v + x * _endowment_account(rates, x, t) + neg(xs)
    Bl = account_value(rates, "lend", t)
    Bb = account_value(rates, "borrow", t)
    Bib = account_value(rates, "funding", t)
    Bc = account_value(rates, "collateral", t)
    c = sign * C(t, s)
    return StrategySnapshot(xi=xi, psi_l=pos(w) / Bl, psi_b=-neg(w) / Bb, psi_ib=-pos(xs) / Bib,
                            eta_b=-pos(c) / Bc, eta_l=neg(c) / Bc)


@dataclass(frozen=True)
class WealthPath:
    """Portfolio value V^p and wealth V = V^p - C along one or many paths.

    Arrays have shape (n_paths, n_times). ``e_T`` is V_T - V0_T(x).
    """

    times: np.ndarray
    Vp: np.ndarray
    V: np.ndarray
    e_T: np.ndarray
    xi: np.ndarray


def simulate_paths(asset: AssetModel, rates: RateModel, n_paths: int, n_steps: int,
                   rng: np.random.Generator, measure: str = "auxiliary", t0: float = 0.0):
    """Spot paths on a uniform grid over [t0, T] by log-Euler steps.

    The step is exact for lognormal dynamics with constant coefficients.
    ``measure`` selects the auxiliary drift (beta s - kappa) or the physical
    drift mu.
    """
    times = np.linspace(t0, rates.horizon, n_steps + 1)
    S = np.empty((n_paths, n_steps + 1))
    S[:, 0] = asset.s0
    for k in range(n_steps):
        t, h = times[k], times[k + 1] - times[k]
        s = S[:, k]
        drift = asset.aux_drift(t, s, rates) if measure == "auxiliary" else asset.mu(t, s)
        vol = np.asarray(asset.sigma(t, s), dtype=float) / s
        z = rng.standard_normal(n_paths)
        S[:, k + 1] = s * np.exp((drift / s - 0.5 * vol ** 2) * h + vol * np.sqrt(h) * z)
    return times, S


def simulate_replication(surface: ValueSurface, rates: RateModel, asset: AssetModel,
                         contract: Contract, C: CollateralSpec | None, x, path, dt: float | None = None,
                         t0: float = 0.0, scheme: str = "euler", premium: float | None = None) -> WealthPath:
    """Forward integration of the self-financing wealth along spot paths.

    ``path`` is either ``(times, spots)`` or an array of spots spaced ``dt``
    apart from ``t0``; spots may hold one path per row. The portfolio starts
    from x plus the premium (the surface price by default) plus collateral
    and rebalances to the surface hedge at every step. ``scheme='milstein'``
    adds the second-order correction 1/2 xi_s (dS^2 - sigma^2 dt) of the
    hedge term, which makes the scheme first order in dt.
    """
    x = endowment_value(x)
    C = surface.collateral if C is None else C
    if isinstance(path, tuple):
        times, S = (np.asarray(a, dtype=float) for a in path)
    else:
        S = np.asarray(path, dtype=float)
        if dt is None:
            raise DomainError("dt is required when the path carries no times")
        times = t0 + dt * np.arange(S.shape[-1])
    S = np.atleast_2d(S)
    if abs(times[-1] - rates.horizon) > 1e-9:
        raise DomainError("the path must end at the horizon")
    if np.any(S < surface.spots[0] - _EPS) or np.any(S > surface.spots[-1] + _EPS):
        raise DomainError("path leaves the grid hull")
    if scheme not in ("euler", "milstein"):
        raise DomainError(f"unknown scheme {scheme!r}")
    sign = _side_sign(surface)
    stream = effective_stream(contract, C, rates)
    flow_steps = _flow_steps(times, contract.flow_times)
    gamma = None
    if scheme == "milstein":
        gamma = ValueSurface(surface.times, surface.spots, surface.v, surface.gamma(False),
                             surface.v_ex, surface.gamma(True), surface.collateral)

    n_paths, n = S.shape
    Vp = np.empty((n_paths, n))
    XI = np.zeros((n_paths, n))
    s = S[:, 0]
    start = sign * surface.sample("v_ex", times[0], s) if premium is None else sign * premium + sign * C(times[0], s)
    Vp[:, 0] = x * _endowment_account(rates, x, times[0]) + start
    for k in range(n - 1):
        t, h = times[k], times[k + 1] - times[k]
        s, s1 = S[:, k], S[:, k + 1]
        xi = sign * surface.sample("delta_ex", t, s)
        XI[:, k] = xi
        xs = xi * s
        w = Vp[:, k] + neg(xs)
        ds = s1 - s
        # account units are held fixed over the step, so each account grows by B(t + h) / B(t) - 1
        g_l, g_b, g_ib = (np.expm1(c.integral(t, t + h)) for c in (rates.r_l, rates.r_b, rates.r_ib[0]))
        dv = (xi * (ds + asset.kappa(t, s) * h)
              - g_ib * pos(xs) + g_l * pos(w) - g_b * neg(w))
        if gamma is not None:
            var = np.asarray(asset.sigma(t, s), dtype=float) ** 2 * h
            dv += 0.5 * sign * gamma.sample("delta_ex", t, s) * (ds * ds - var)
        dv += sign * stream.density(t, s) * h
        dv += sign * (C(times[k + 1], s1) - C(t, s))
        for tk in flow_steps.get(k + 1, ()):
            dv += sign * stream.jump(tk, s1)
        Vp[:, k + 1] = Vp[:, k] + dv
    V = Vp - sign * np.array([C(t, S[:, j]) for j, t in enumerate(times)]).T
    target = trivial_wealth(rates, x, times[-1])
    return WealthPath(times, Vp, V, V[:, -1] - target, XI)


def _flow_steps(times: np.ndarray, flow_times) -> dict[int, list[float]]:
    """Map each dated flow (and maturity) to the first path node at or after it."""
    out: dict[int, list[float]] = {}
    for tk in sorted({*flow_times, float(times[-1])}):
        k = int(np.searchsorted(times, tk - 1e-9))
        out.setdefault(min(k, times.size - 1), []).append(tk)
    return out


@dataclass(frozen=True)
class UPath:
    times: np.ndarray
    U: np.ndarray


def _advance(w: float, k: float, rl: float, rb: float, h: float) -> float:
    """Exact solution of w' = r_l w+ - r_b w- + k over a step of length h."""
    while h > 0.0:
        up = w > 0.0 or (w == 0.0 and k > 0.0)
        r = rl if up else rb
        tau = _crossing(w, k, r, up)
        if tau is None or tau >= h:
            return _linear(w, k, r, h)
        w, h = 0.0, h - tau
        if k == 0.0:
            return 0.0
    return w


def _linear(w: float, k: float, r: float, h: float) -> float:
    if r == 0.0:
        return w + k * h
    return (w + k / r) * np.exp(r * h) - k / r


def _crossing(w: float, k: float, r: float, up: bool) -> float | None:
    """Time at which w reaches 0 under a single branch, if it does."""
    if w == 0.0:
        return None
    if (up and k >= 0.0) or (not up and k <= 0.0):
        return None
    if r == 0.0:
        return -w / k
    rate = r * w + k
    if (up and rate >= 0.0) or (not up and rate <= 0.0):
        return None
    return float(np.log(k / rate) / r)


def _cash_wealth(contract: Contract, C: CollateralSpec, rates: RateModel, x: float, sign: float,
                 premium: float, dt: float, spot: Callable[[float], float] | float | None = None,
                 times: np.ndarray | None = None):
    """Cash-only wealth V^p of the party facing sign * (A, C), started with premium."""
    T = rates.horizon
    if times is None:
        n = max(1, int(np.ceil(T / dt - 1e-9)))
        times = time_grid(T, n, [*contract.flow_times, *rates.breakpoints()])
    spot_at = _spot_function(spot)
    stream = effective_stream(contract, C, rates)
    flows = _flow_steps(times, contract.flow_times)
    W = np.empty(times.size)
    c_prev = _scalar(C(times[0], spot_at(times[0])))
    W[0] = x * float(_endowment_account(rates, x, times[0])) + sign * (premium + c_prev)
    for j in range(times.size - 1):
        t, t1 = times[j], times[j + 1]
        s = spot_at(t)
        mid = 0.5 * (t + t1)
        k = sign * _scalar(stream.density(t, s))
        w = _advance(W[j], k, rates.r_l(mid), rates.r_b(mid), t1 - t)
        s1 = spot_at(t1)
        c_next = _scalar(C(t1, s1))
        w += sign * (c_next - _scalar(C(t, s)))
        for tk in flows.get(j + 1, ()):
            w += sign * _scalar(stream.jump(tk, s1))
        W[j + 1] = w
    return times, W


def _scalar(a) -> float:
    value = float(np.asarray(a, dtype=float).reshape(-1)[0])
    if not np.isfinite(value):
        raise DomainError("contract flows depend on the spot; pass a spot path")
    return value


def _spot_function(spot):
    if spot is None:
        return lambda t: np.array([np.nan])
    if callable(spot):
        return lambda t: np.array([float(spot(t))])
    return lambda t: np.array([float(spot)])


def netted_wealth_U(contract: Contract, C: CollateralSpec, rates: RateModel, dt: float,
                    spot=None) -> UPath:
    """U(A, C): the unhedged cash position in (-A, -C) started from -p.

    Between events the rates and the collateral are frozen per step and the
    equation is solved in closed form, including the exact time at which
    U - C changes sign. ``spot`` (a number or a function of t) is needed
    only when flows depend on the spot.
    """
    times, W = _cash_wealth(contract, C, rates, 0.0, -1.0, contract.p, dt, spot)
    spot_at = _spot_function(spot if spot is not None else 0.0)
    Cs = np.array([_scalar(C(t, spot_at(t))) for t in times])
    return UPath(times, W + Cs)


def cash_price(contract: Contract, C: CollateralSpec, rates: RateModel, x, side: str = "hedger",
               dt: float = 1e-3, spot=None) -> float:
    """Price of a spot-independent contract replicated with cash accounts only.

    Finds the premium for which the party's cash wealth ends at V0_T(x).
    """
    x = endowment_value(x)
    sign = 1.0 if side == "hedger" else -1.0
    target = trivial_wealth(rates, x)

    def gap(p):
        return _cash_wealth(contract, C, rates, x, sign, p, dt, spot)[1][-1] - target

    scale = 1.0 + abs(x) + sum(abs(_scalar(f(np.array([1.0])))) for _, f in contract.dated_flows)
    if contract.payoff is not None:
        scale += abs(_scalar(contract.terminal(np.array([1.0]))))
    lo, hi = -10.0 * scale, 10.0 * scale
    return float(brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))


@dataclass(frozen=True)
class ArbitrageReport:
    max_violation: np.ndarray
    terminal_excess: np.ndarray
    wealth_lower_bound: float
    flagged: bool


def arbitrage_diagnostic(contract: Contract, C: CollateralSpec, rates: RateModel, asset: AssetModel,
                         surface: ValueSurface, paths, x=0.0, traded_price: float | None = None,
                         tol: float = 1e-8) -> ArbitrageReport:
    """Check the discounted netted-wealth inequality along simulated paths.

    The hedger replicates (A, C) from x plus the traded price and also holds
    the unhedged cash position in (-A, -C). With D the discounted netted
    wealth minus the gains from the discounted cum-dividend stock, every
    increment of D must be nonpositive. Discounting uses B^l for x >= 0
    and B^b for x < 0. ``terminal_excess`` is the discounted
    V_T - V0_T(x) of the hedged leg alone. It is positive on every path
    when the contract is sold above the hedger's price, and the report is
    then flagged.
    """
    x = endowment_value(x)
    times, S = (np.asarray(a, dtype=float) for a in paths)
    S = np.atleast_2d(S)
    premium = traded_price if traded_price is not None else float(
        surface.sample("v_ex", times[0], S[0, 0]) - C(times[0], np.array([S[0, 0]]))[0])
    traded = Contract(premium, contract.dated_flows, contract.continuous, contract.payoff)
    wp = simulate_replication(surface, rates, asset, traded, C, x, (times, S), premium=premium)
    kind = "lend" if x >= 0 else "borrow"
    B = account_value(rates, kind, times)
    r_disc = rates.curve(kind)
    violations, excess, lows = [], [], []
    for i in range(S.shape[0]):
        spot_path = S[i]
        U = _cash_wealth(traded, C, rates, 0.0, -1.0, premium, 0.0, None,
                         times=times)[1] if _deterministic(contract) else \
            _cash_wealth(traded, C, rates, 0.0, -1.0, premium, 0.0,
                         lambda t, sp=spot_path: np.interp(t, times, sp), times=times)[1]
        Cs = np.array([_scalar(C(t, np.array([sp]))) for t, sp in zip(times, spot_path)])
        U = U + Cs
        net = (wp.V[i] + U) / B
        ds = np.diff(spot_path)
        kap = np.array([_scalar(asset.kappa(t, np.array([sp]))) for t, sp in zip(times[:-1], spot_path[:-1])])
        h = np.diff(times)
        rd = r_disc(times[:-1])
        gains = wp.xi[i, :-1] * (ds + kap * h - rd * spot_path[:-1] * h) / B[:-1]
        D = np.diff(net) - gains
        violations.append(max(0.0, float(np.max(D))))
        excess.append(float(wp.e_T[i] / B[-1]))
        lows.append(float(np.min(net)))
    excess = np.array(excess)
    return ArbitrageReport(np.array(violations), excess, float(min(lows)),
                           bool(np.all(excess > tol)))


def _deterministic(contract: Contract) -> bool:
    probe = np.array([1.0, 2.0])
    vals = [f(probe) for _, f in contract.dated_flows] + [contract.terminal(probe)]
    return all(np.ptp(np.asarray(v, dtype=float) + 0.0 * probe) == 0.0 for v in vals) and contract.continuous is None


def write_path_report(path, e_T, max_violation) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_id", "e_T", "max_violation"])
        for i, (e, m) in enumerate(zip(e_T, max_violation)):
            w.writerow([i, f"{e:.12g}", f"{m:.12g}"])
