"""Bilateral price ranges, endowment studies and closed-form counterexamples."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import DomainError
from .lattice_bsde import build_lattice, solve_bsde
from .market_model import (AssetModel, CollateralSpec, Contract, PiecewiseConstant, RateModel,
                           account_value, effective_stream, endowment_value)
from .pde_engine import (GridSpec, ValueSurface, price_at, solve_counterparty_pde,
                         solve_hedger_pde)


@dataclass(frozen=True)
class Model:
    rates: RateModel
    asset: AssetModel


class Solver(Protocol):
    def price(self, model: Model, contract: Contract, C: CollateralSpec, x: float,
              side: str = "hedger") -> float: ...


@dataclass(frozen=True)
class PDESolver:
    grid: GridSpec

    def surface(self, model: Model, contract: Contract, C: CollateralSpec, x: float,
                side: str = "hedger") -> ValueSurface:
        solve = solve_hedger_pde if side == "hedger" else solve_counterparty_pde
        return solve(model.rates, model.asset, contract, C, x, self.grid)

    def price(self, model, contract, C, x, side="hedger") -> float:
        return price_at(self.surface(model, contract, C, x, side), 0.0, model.asset.s0)

    def refined(self, factor: int = 2) -> "PDESolver":
        return PDESolver(self.grid.refined(factor))


@dataclass(frozen=True)
class LatticeSolver:
    steps: int

    def price(self, model, contract, C, x, side="hedger") -> float:
        lat = build_lattice(model.asset, model.rates, self.steps, contract.flow_times)
        return solve_bsde(lat, effective_stream(contract, C, model.rates), x, side).price


# -- price ranges ----------------------------------------------------------

@dataclass(frozen=True)
class PriceRange:
    pc: float
    ph: float
    classification: str
    case: str | None
    tol: float = 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return (min(self.pc, self.ph), max(self.pc, self.ph))


def _case(ph: float, pc: float) -> str | None:
    if pc < ph:
        if pc >= 0.0:
            return "H.1"
        return "H.2" if ph > 0.0 else "H.3"
    if ph < pc:
        if ph >= 0.0:
            return "C.1"
        return "C.2" if pc > 0.0 else "C.3"
    return None


def bilateral_range(ph: float, pc: float, tol: float = 0.0) -> PriceRange:
    """Fair when pc <= ph - tol, profitable when ph < pc - tol, else degenerate."""
    ph, pc = float(ph), float(pc)
    if not (np.isfinite(ph) and np.isfinite(pc)):
        raise DomainError("prices must be finite")
    if abs(ph - pc) <= tol:
        label = "degenerate"
    elif pc <= ph - tol:
        label = "fair"
    else:
        label = "profitable"
    return PriceRange(pc, ph, label, _case(ph, pc), tol)


# -- closed-form counterexamples -------------------------------------------

@dataclass(frozen=True)
class Counterexample:
    """Closed-form prices together with the contract that produces them."""

    ph0: float
    pc0: float
    contract: Contract

    def __iter__(self):
        return iter((self.ph0, self.pc0))


def increasing_contract(t0: float, alpha: float) -> Contract:
    """No premium, no collateral, a single payment alpha to the hedger at t0."""
    return Contract(p=0.0, dated_flows=((t0, alpha),))


def counterexample_increasing(x1: float, x2: float, rates: RateModel, t0: float,
                              alpha: float) -> Counterexample:
    """Prices of the single-inflow contract when x1 > 0 > x2.

    The hedger lends throughout and the counterparty borrows throughout, so
    ph0 = -alpha / B^l(t0) and pc0 = -alpha / B^b(t0).
    """
    if not (x1 > 0.0 > x2):
        raise DomainError("requires x1 > 0 > x2")
    if not 0.0 < t0 <= rates.horizon:
        raise DomainError("t0 must lie in (0, T]")
    Bl = float(account_value(rates, "lend", t0))
    Bb = float(account_value(rates, "borrow", t0))
    bound = min(x1 * Bl, -x2 * Bb)
    if not 0.0 < alpha <= bound:
        raise DomainError(f"alpha={alpha} outside (0, {bound}]")
    return Counterexample(-alpha / Bl, -alpha / Bb, increasing_contract(t0, alpha))


def replicate_increasing(x1: float, x2: float, rates: RateModel, t0: float, alpha: float):
    """Terminal errors of the explicit cash strategies for the single-inflow contract.

    The hedger keeps x1 + ph0 in the lending account and deposits alpha at
    t0. The counterparty keeps x2 - pc0 in the borrowing account and pays
    alpha out of it at t0.
    """
    ph0, pc0 = counterexample_increasing(x1, x2, rates, t0, alpha)
    T = rates.horizon
    Bl0, BlT = (float(account_value(rates, "lend", t)) for t in (t0, T))
    Bb0, BbT = (float(account_value(rates, "borrow", t)) for t in (t0, T))
    units_h = x1 + ph0
    units_h = (units_h * Bl0 + alpha) / Bl0
    units_c = x2 - pc0
    units_c = (units_c * Bb0 - alpha) / Bb0
    return units_h * BlT - x1 * BlT, units_c * BbT - x2 * BbT


@dataclass(frozen=True)
class CounterexampleSpec:
    """Pay alpha at t0 and receive alpha exp(int_{t0}^T r) at T, with r_l < r < r_b."""

    t0: float
    r: PiecewiseConstant | float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "r", PiecewiseConstant.of(self.r))

    def growth(self, rates: RateModel) -> float:
        return float(np.exp(self.r.integral(self.t0, rates.horizon)))

    def kappa1(self, rates: RateModel) -> float:
        T = rates.horizon
        return (-1.0 / float(account_value(rates, "lend", self.t0))
                + self.growth(rates) / float(account_value(rates, "lend", T)))

    def kappa2(self, rates: RateModel) -> float:
        """Counterparty coefficient, pc0 = alpha * kappa2.

        Borrowing at r_b makes the early receipt worth more than the later
        payment: kappa2 = 1/B^b(t0) - exp(int r)/B^b(T).
        """
        T = rates.horizon
        return (1.0 / float(account_value(rates, "borrow", self.t0))
                - self.growth(rates) / float(account_value(rates, "borrow", T)))

    def contract(self, rates: RateModel) -> Contract:
        return Contract(p=0.0, dated_flows=((self.t0, -self.alpha),
                                            (rates.horizon, self.alpha * self.growth(rates))))

    def alpha_bounds(self, x1: float, x2: float, rates: RateModel) -> dict[str, float]:
        T = rates.horizon
        spread_l = self.r.integral(self.t0, T) - rates.r_l.integral(self.t0, T)
        spread_b = self.r.integral(self.t0, T) - rates.r_b.integral(self.t0, T)
        return {
            "lower: x2/kappa2": x2 / self.kappa2(rates),
            "hedger lends after t0": x1 * float(account_value(rates, "lend", self.t0)) * np.exp(-spread_l),
            "counterparty borrows after t0": -x2 * float(account_value(rates, "borrow", self.t0)) * np.exp(-spread_b),
            "hedger lends before t0: x1/kappa1": x1 / self.kappa1(rates),
        }


def counterexample_kappa(x1: float, x2: float, rates: RateModel, spec: CounterexampleSpec) -> Counterexample:
    """Closed-form (ph0, pc0) = (-alpha kappa1, alpha kappa2) for the pay-early/receive-late contract."""
    if not (x1 > 0.0 > x2):
        raise DomainError("requires x1 > 0 > x2")
    T = rates.horizon
    ts = np.array([0.0, *rates.breakpoints(), *spec.r.breakpoints(T)])
    if np.any(spec.r(ts) <= rates.r_l(ts)) or np.any(spec.r(ts) >= rates.r_b(ts)):
        raise DomainError("the intermediate rate must satisfy r_l < r < r_b")
    if not 0.0 < spec.t0 < T:
        raise DomainError("t0 must lie in (0, T)")
    k1, k2 = spec.kappa1(rates), spec.kappa2(rates)
    if not (k1 > 0.0 and k2 > 0.0):
        raise DomainError("kappa1 and kappa2 must be positive")
    bounds = spec.alpha_bounds(x1, x2, rates)
    lower = bounds.pop("lower: x2/kappa2")
    if spec.alpha < lower or spec.alpha <= 0.0:
        raise DomainError(f"alpha={spec.alpha} below the bound x2/kappa2={lower}")
    for name, value in bounds.items():
        if spec.alpha > value:
            raise DomainError(f"alpha={spec.alpha} violates '{name}' (bound {value})")
    return Counterexample(-spec.alpha * k1, spec.alpha * k2, spec.contract(rates))


# -- endowment studies -----------------------------------------------------

@dataclass(frozen=True)
class SweepReport:
    xs: np.ndarray
    ph: np.ndarray
    pc: np.ndarray
    tol: float
    hedger_monotone: bool
    counterparty_monotone: bool
    ordered: bool
    nested: bool
    plateau_slopes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.hedger_monotone and self.counterparty_monotone and self.ordered and self.nested

    def rows(self):
        return list(zip(self.xs.tolist(), self.ph.tolist(), self.pc.tolist()))


def endowment_sweep(model: Model, contract: Contract, C: CollateralSpec, xs: Sequence[float],
                    solver: Solver, tol: float = 1e-8, workers: int = 1) -> SweepReport:
    """Prices for x1 = x2 = x over xs, with the monotonicity and nesting checks.

    On x >= 0 the hedger's price does not increase with x and the
    counterparty's does not decrease; on x <= 0 both directions flip. Every
    range [pc(x), ph(x)] sits inside [pc(0), ph(0)]. With ``workers > 1``
    the solves run in a thread pool; results do not depend on the schedule.
    """
    xs = np.asarray(xs, dtype=float)
    if np.any(np.diff(xs) <= 0.0):
        raise DomainError("xs must be strictly increasing")
    jobs = [(x, side) for side in ("hedger", "counterparty") for x in xs]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        prices = list(pool.map(lambda job: solver.price(model, contract, C, *job), jobs))
    ph, pc = np.array(prices[:xs.size]), np.array(prices[xs.size:])
    pos, negs = xs >= 0.0, xs <= 0.0
    h_ok = bool(np.all(np.diff(ph[pos]) <= tol) and np.all(np.diff(ph[negs]) >= -tol))
    c_ok = bool(np.all(np.diff(pc[pos]) >= -tol) and np.all(np.diff(pc[negs]) <= tol))
    ordered = bool(np.all(pc <= ph + tol))
    nested = True
    if np.any(xs == 0.0):
        i0 = int(np.flatnonzero(xs == 0.0)[0])
        nested = bool(np.all(pc >= pc[i0] - tol) and np.all(ph <= ph[i0] + tol))
    slopes = {}
    for label, sel in (("positive", np.flatnonzero(pos)), ("negative", np.flatnonzero(negs)[::-1])):
        if sel.size >= 2:
            a, b = sel[-2], sel[-1]
            dx = abs(xs[b] - xs[a])
            slopes[label] = (abs(ph[b] - ph[a]) / dx, abs(pc[b] - pc[a]) / dx)
    return SweepReport(xs, ph, pc, tol, h_ok, c_ok, ordered, nested, slopes)


def _surface_prices(solver, model, contract, C, x, side) -> np.ndarray:
    if hasattr(solver, "surface"):
        return solver.surface(model, contract, C, x, side).price_grid()
    return np.atleast_1d(solver.price(model, contract, C, x, side))


def stability_estimate(model: Model, contract: Contract, C: CollateralSpec,
                       x_pairs: Sequence[tuple[float, float]], solver: Solver,
                       side: str = "hedger") -> float:
    """Largest |price(x) - price(x')| / |x - x'| over the pairs and over the grid."""
    ratio = 0.0
    for a, b in x_pairs:
        if a == b:
            raise DomainError("endowment pairs must be distinct")
        pa = _surface_prices(solver, model, contract, C, a, side)
        pb = _surface_prices(solver, model, contract, C, b, side)
        ratio = max(ratio, float(np.max(np.abs(pa - pb))) / abs(a - b))
    return ratio


@dataclass(frozen=True)
class HomogeneityReport:
    lambdas: tuple[float, ...]
    errors: tuple[float, ...]

    @property
    def max_error(self) -> float:
        return max(self.errors) if self.errors else 0.0


def homogeneity_check(model: Model, contract: Contract, C: CollateralSpec, x: float,
                      lambdas: Sequence[float], solver: Solver) -> HomogeneityReport:
    """max over the grid of |P^h(lam x, lam A, lam C) - lam P^h(x, A, C)| for each lam."""
    x = endowment_value(x)
    if x < 0.0:
        raise DomainError("homogeneity is checked for x >= 0")
    base = _surface_prices(solver, model, contract, C, x, "hedger")
    errors = []
    for lam in lambdas:
        if lam < 0.0:
            raise DomainError("lambda must be nonnegative")
        scaled = _surface_prices(solver, model, contract.scaled(lam), C.scaled(lam), lam * x, "hedger")
        errors.append(float(np.max(np.abs(scaled - lam * base))))
    return HomogeneityReport(tuple(float(l) for l in lambdas), tuple(errors))


def discretization_error(model: Model, contract: Contract, C: CollateralSpec, x: float,
                         side: str, grid: GridSpec) -> float:
    """max |u_fine - u_coarse| over the coarse nodes, with the fine grid twice as dense."""
    coarse = PDESolver(grid).surface(model, contract, C, x, side)
    fine = PDESolver(grid.refined(2)).surface(model, contract, C, x, side)
    tt, ss = np.meshgrid(coarse.times, coarse.spots, indexing="ij")
    Cg = np.array([C(t, coarse.spots) for t in coarse.times])
    u_f = fine.sample("v_ex", tt, ss) - Cg
    return float(np.max(np.abs(u_f - coarse.price_grid())))
