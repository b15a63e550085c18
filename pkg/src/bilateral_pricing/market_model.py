"""Rates, accounts, asset dynamics, contracts and collateral.

Every curve is deterministic and piecewise constant in time, so account
values are exact exponentials. Spot-dependent quantities are plain callables
that accept numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError

Field = Callable[[float, np.ndarray], np.ndarray]
SpotFunction = Callable[[np.ndarray], np.ndarray]

_T_EPS = 1e-12


class PiecewiseConstant:
    """Right-continuous step function of time.

    ``knots`` is a sequence of ``(t_start, value)`` pairs, or a single number
    for a constant curve. The first segment always starts at 0.
    """

    def __init__(self, knots: Sequence[Sequence[float]] | float):
        if np.isscalar(knots):
            knots = [(0.0, float(knots))]
        pairs = sorted((float(a), float(b)) for a, b in knots)
        if not pairs:
            raise DomainError("a curve needs at least one knot")
        if pairs[0][0] > 0.0:
            raise DomainError("the first knot of a curve must start at t = 0")
        starts = np.array([p[0] for p in pairs])
        if np.any(np.diff(starts) <= 0.0):
            raise DomainError("curve knot times must be strictly increasing")
        self.starts = starts
        self.values = np.array([p[1] for p in pairs])
        # cumulative integral at each knot
        widths = np.diff(starts)
        self._cum = np.concatenate([[0.0], np.cumsum(self.values[:-1] * widths)])

    @classmethod
    def of(cls, obj) -> "PiecewiseConstant":
        return obj if isinstance(obj, PiecewiseConstant) else cls(obj)

    def __call__(self, t):
        idx = np.searchsorted(self.starts, t, side="right") - 1
        out = self.values[np.clip(idx, 0, None)]
        return float(out) if np.ndim(out) == 0 else out

    def primitive(self, t):
        """Integral of the curve over [0, t]."""
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.starts, t, side="right") - 1, 0, None)
        out = self._cum[idx] + self.values[idx] * (t - self.starts[idx])
        return float(out) if out.ndim == 0 else out

    def integral(self, t0: float, t1: float) -> float:
        return self.primitive(t1) - self.primitive(t0)

    def breakpoints(self, horizon: float) -> list[float]:
        return [float(t) for t in self.starts if 0.0 < t < horizon]

    def bounds(self, horizon: float) -> tuple[float, float]:
        live = self.values[self.starts < horizon]
        return float(live.min()), float(live.max())

    def scaled(self, factor: float) -> "PiecewiseConstant":
        return PiecewiseConstant(list(zip(self.starts, self.values * factor)))

    def __repr__(self) -> str:
        pairs = ", ".join(f"({a:g}, {b:g})" for a, b in zip(self.starts, self.values))
        return f"PiecewiseConstant([{pairs}])"


def _curve(obj) -> PiecewiseConstant:
    return PiecewiseConstant.of(obj)


@dataclass(frozen=True)
class RateModel:
    """Lending, borrowing, per-asset funding and collateral rates.

    ``r_ib`` holds one curve per risky asset. Setting ``strict`` records that
    a scenario needs r_l < r_b everywhere.
    """

    r_l: PiecewiseConstant
    r_b: PiecewiseConstant
    r_ib: tuple[PiecewiseConstant, ...]
    r_c: PiecewiseConstant
    horizon: float
    strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "r_l", _curve(self.r_l))
        object.__setattr__(self, "r_b", _curve(self.r_b))
        object.__setattr__(self, "r_c", _curve(self.r_c))
        r_ib = self.r_ib
        if not _is_multi(r_ib):
            r_ib = (r_ib,)
        object.__setattr__(self, "r_ib", tuple(_curve(c) for c in r_ib))
        if not self.horizon > 0.0:
            raise DomainError("the horizon T must be positive")

    @classmethod
    def constant(cls, r_l: float, r_b: float, r_ib: float | None = None,
                 r_c: float = 0.0, horizon: float = 1.0, strict: bool = False) -> "RateModel":
        return cls(r_l, r_b, r_b if r_ib is None else r_ib, r_c, horizon, strict)

    @property
    def n_assets(self) -> int:
        return len(self.r_ib)

    def curve(self, kind: str, asset: int = 0) -> PiecewiseConstant:
        if kind == "lend":
            return self.r_l
        if kind == "borrow":
            return self.r_b
        if kind == "funding":
            return self.r_ib[asset]
        if kind == "collateral":
            return self.r_c
        raise DomainError(f"unknown account kind {kind!r}")

    def ib(self, t) -> np.ndarray:
        """Funding rates of all assets at time t, shape (d,)."""
        return np.array([c(t) for c in self.r_ib])

    def breakpoints(self) -> list[float]:
        pts: set[float] = set()
        for c in (self.r_l, self.r_b, self.r_c, *self.r_ib):
            pts.update(c.breakpoints(self.horizon))
        return sorted(pts)

    def _grid(self) -> np.ndarray:
        return np.array([0.0, *self.breakpoints()])

    @property
    def strong_funding(self) -> bool:
        """True when r_b(t) <= r_ib(t) for every asset and every t."""
        ts = self._grid()
        return bool(all(np.all(self.r_b(ts) <= c(ts)) for c in self.r_ib))

    def violations(self) -> list[str]:
        ts = self._grid()
        rl, rb = self.r_l(ts), self.r_b(ts)
        out = []
        for name, c in (("r_l", self.r_l), ("r_b", self.r_b), ("r_c", self.r_c)):
            if np.any(c(ts) < 0.0):
                out.append(f"{name} ≥ 0")
        if any(np.any(c(ts) < 0.0) for c in self.r_ib):
            out.append("r_ib ≥ 0")
        if np.any(rl > rb):
            out.append("r_l ≤ r_b")
        if any(np.any(rl > c(ts)) for c in self.r_ib):
            out.append("r_l ≤ r_ib")
        if self.strict and np.any(rl >= rb):
            out.append("r_l < r_b")
        return out


def _is_pair(obj) -> bool:
    return isinstance(obj, (list, tuple)) and len(obj) == 2 and all(np.isscalar(v) for v in obj)


def _is_multi(r_ib) -> bool:
    """True when r_ib lists one curve per asset rather than a single curve."""
    if not isinstance(r_ib, (list, tuple)) or not r_ib:
        return False
    return not all(_is_pair(k) for k in r_ib)


def account_value(rates: RateModel, kind: str, t, asset: int = 0):
    """B(t) = exp(int_0^t r) for the selected account."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -_T_EPS) or np.any(t_arr > rates.horizon + _T_EPS):
        raise DomainError(f"t={t} outside [0, {rates.horizon}]")
    return np.exp(rates.curve(kind, asset).primitive(np.clip(t_arr, 0.0, rates.horizon)))


def growth(rates: RateModel, kind: str, t0: float, t1: float, asset: int = 0) -> float:
    """B(t1) / B(t0) for the selected account."""
    return float(np.exp(rates.curve(kind, asset).integral(t0, t1)))


def as_field(obj) -> Field:
    """Wrap a constant or callable as a vectorised function of (t, s)."""
    if callable(obj):
        return obj
    value = float(obj)
    return lambda t, s: np.full(np.shape(s), value)


def as_spot_function(obj) -> SpotFunction:
    if callable(obj):
        return obj
    value = float(obj)
    return lambda s: np.full(np.shape(s), value)


@dataclass(frozen=True)
class AssetModel:
    """One risky asset with absolute volatility sigma(t, s).

    ``kappa`` is the dividend flow per share per year, ``beta`` the auxiliary
    drift rate. ``beta=None`` means beta follows r_b.
    """

    s0: float
    sigma: Field
    mu: Field = 0.0
    kappa: Field = 0.0
    beta: PiecewiseConstant | float | None = None
    domain: tuple[float, float] = (0.0, np.inf)

    def __post_init__(self):
        object.__setattr__(self, "sigma", as_field(self.sigma))
        object.__setattr__(self, "mu", as_field(self.mu))
        object.__setattr__(self, "kappa", as_field(self.kappa))
        if self.beta is not None:
            object.__setattr__(self, "beta", _curve(self.beta))

    @classmethod
    def lognormal(cls, s0: float, vol: float, **kw) -> "AssetModel":
        return cls(s0=s0, sigma=lambda t, s: vol * np.asarray(s, dtype=float), **kw)

    def beta_curve(self, rates: RateModel) -> PiecewiseConstant:
        return rates.r_b if self.beta is None else self.beta

    def beta_at(self, t, rates: RateModel):
        return self.beta_curve(rates)(t)

    def aux_drift(self, t, s, rates: RateModel) -> np.ndarray:
        """Drift of the spot under the auxiliary martingale measure."""
        s = np.asarray(s, dtype=float)
        return self.beta_at(t, rates) * s - self.kappa(t, s)

    def with_beta(self, beta) -> "AssetModel":
        return AssetModel(self.s0, self.sigma, self.mu, self.kappa, beta, self.domain)


@dataclass(frozen=True)
class Contract:
    """Cash flows booked from the hedger's side.

    ``p``, dated flows and the continuous flow are amounts received by the
    hedger. ``payoff`` is the amount the hedger delivers at maturity, so a
    sold call has payoff (s - K)+.
    """

    p: float = 0.0
    dated_flows: tuple[tuple[float, SpotFunction], ...] = ()
    continuous: Field | None = None
    payoff: SpotFunction | None = None

    def __post_init__(self):
        flows = tuple((float(t), as_spot_function(f)) for t, f in self.dated_flows)
        object.__setattr__(self, "dated_flows", flows)
        if self.continuous is not None:
            object.__setattr__(self, "continuous", as_field(self.continuous))
        if self.payoff is not None:
            object.__setattr__(self, "payoff", as_spot_function(self.payoff))

    @property
    def flow_times(self) -> list[float]:
        return [t for t, _ in self.dated_flows]

    def terminal(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.zeros_like(s) if self.payoff is None else _on(s, self.payoff(s))

    def flow_rate(self, t, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.zeros_like(s) if self.continuous is None else _on(s, self.continuous(t, s))

    def scaled(self, lam: float) -> "Contract":
        lam = float(lam)
        return Contract(
            p=lam * self.p,
            dated_flows=tuple((t, _scale1(f, lam)) for t, f in self.dated_flows),
            continuous=None if self.continuous is None else _scale2(self.continuous, lam),
            payoff=None if self.payoff is None else _scale1(self.payoff, lam),
        )

    def negated(self) -> "Contract":
        return self.scaled(-1.0)


def _on(s, value) -> np.ndarray:
    """Broadcast a callable's output to the shape of the spot argument."""
    return np.array(np.broadcast_to(np.asarray(value, dtype=float), np.shape(s)))


def _scale1(f, lam):
    return lambda s: lam * np.asarray(f(s), dtype=float)


def _scale2(f, lam):
    return lambda t, s: lam * np.asarray(f(t, s), dtype=float)


@dataclass(frozen=True)
class CollateralSpec:
    """Collateral amount C(t, s), positive when held by the hedger.

    When ``maturity`` is set the collateral is returned at that date, so
    C(T, s) = 0 holds by construction. ``running`` gives the pre-settlement
    value, which is what accrues interest on [t, T).
    """

    func: Field = 0.0
    maturity: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "func", as_field(self.func))

    @classmethod
    def zero(cls) -> "CollateralSpec":
        return cls(0.0, None)

    @classmethod
    def constant(cls, value: float, maturity: float) -> "CollateralSpec":
        return cls(float(value), maturity)

    def running(self, t, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return _on(s, self.func(t, s))

    def __call__(self, t, s) -> np.ndarray:
        value = self.running(t, s)
        if self.maturity is not None and t >= self.maturity - _T_EPS:
            return np.zeros_like(value)
        return value

    def scaled(self, lam: float) -> "CollateralSpec":
        return CollateralSpec(_scale2(self.func, float(lam)), self.maturity)

    def negated(self) -> "CollateralSpec":
        return self.scaled(-1.0)


@dataclass(frozen=True)
class Endowment:
    x: float

    @property
    def sign(self) -> str:
        if self.x > 0:
            return "nonnegative"
        if self.x < 0:
            return "nonpositive"
        return "zero"


def endowment_value(x) -> float:
    return float(x.x if isinstance(x, Endowment) else x)


def trivial_wealth(rates: RateModel, x: float, t: float | None = None) -> float:
    """Wealth at t of the endowment left in the lending or borrowing account."""
    t = rates.horizon if t is None else t
    kind = "lend" if x >= 0 else "borrow"
    return float(x * account_value(rates, kind, t))


def collateral_funding_cost(C: CollateralSpec, rates: RateModel, path, t: float,
                            n_steps: int = 256) -> float:
    """F^C_t = -int_0^t C_u r_c(u) du by the trapezoid rule.

    ``path`` is either a fixed spot or a pair ``(times, spots)`` covering
    [0, t]; in the first case a grid containing the rate breakpoints is used.
    """
    if t < 0.0 or t > rates.horizon + _T_EPS:
        raise DomainError(f"t={t} outside [0, {rates.horizon}]")
    if np.isscalar(path):
        times = time_grid(t, n_steps, [b for b in rates.breakpoints() if b < t]) if t > 0 else np.zeros(1)
        spots = np.full_like(times, float(path))
    else:
        times, spots = (np.asarray(a, dtype=float) for a in path)
        keep = times <= t + _T_EPS
        times, spots = times[keep], spots[keep]
    if times.size < 2:
        return 0.0
    # left limits of r_c and C on each panel, so jumps at panel ends do not leak
    mids = 0.5 * (times[:-1] + times[1:])
    rc = rates.r_c(mids)
    c_left = np.array([C.running(a, b) for a, b in zip(times[:-1], spots[:-1])])
    c_right = np.array([C.running(a, b) for a, b in zip(times[1:], spots[1:])])
    return float(-np.sum(0.5 * (c_left + c_right) * rc * np.diff(times)))


def time_grid(horizon: float, n_steps: int, breakpoints: Sequence[float] = ()) -> np.ndarray:
    """Time nodes on [0, horizon] with roughly uniform steps hitting every breakpoint."""
    pts = sorted({0.0, float(horizon), *(float(b) for b in breakpoints if 0.0 < b < horizon)})
    nodes = [0.0]
    for a, b in zip(pts[:-1], pts[1:]):
        k = max(1, int(round(n_steps * (b - a) / horizon)))
        nodes.extend(np.linspace(a, b, k + 1)[1:])
    return np.array(nodes)


@dataclass(frozen=True)
class EffectiveStream:
    """The stream A^C = A + C + F^C seen by the pricing equations.

    Solvers work with the price u = Y - C, in which collateral jumps cancel.
    They need the dated jumps of A (``jump``), the running density
    a - r_c C (``density``) and the collateral itself.
    """

    contract: Contract
    collateral: CollateralSpec
    rates: RateModel

    @property
    def horizon(self) -> float:
        return self.rates.horizon

    @property
    def jump_times(self) -> list[float]:
        return sorted({*self.contract.flow_times, self.horizon})

    def jump(self, t: float, s) -> np.ndarray:
        """Amount received by the hedger at the dated time t."""
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for tk, f in self.contract.dated_flows:
            if abs(tk - t) <= _T_EPS:
                out = out + f(s)
        if abs(t - self.horizon) <= _T_EPS:
            out = out - self.contract.terminal(s)
        return out

    def density(self, t, s) -> np.ndarray:
        return self.contract.flow_rate(t, s) - self.rates.r_c(t) * self.collateral.running(t, s)

    def increments(self, spots, n_times: int = 200) -> list[np.ndarray]:
        """Sampled increments of A^C on (0, T]: jumps, density and collateral moves."""
        spots = np.asarray(spots, dtype=float)
        times = time_grid(self.horizon, n_times, [*self.contract.flow_times, *self.rates.breakpoints()])
        out = [self.jump(t, spots) for t in self.jump_times]
        for t in times[:-1]:
            out.append(self.density(t, spots))
        c = np.array([self.collateral.running(t, spots) for t in times])
        c[-1] = self.collateral(self.horizon, spots)
        out.extend(np.diff(c, axis=0))
        return out

    def _default_spots(self) -> np.ndarray:
        return np.geomspace(1e-2, 1e4, 241)

    def is_decreasing(self, spots=None) -> bool:
        spots = self._default_spots() if spots is None else spots
        return all(np.all(inc <= 0.0) for inc in self.increments(spots))

    def is_increasing(self, spots=None) -> bool:
        spots = self._default_spots() if spots is None else spots
        return all(np.all(inc >= 0.0) for inc in self.increments(spots))

    @property
    def decreasing(self) -> bool:
        return self.is_decreasing()

    @property
    def increasing(self) -> bool:
        return self.is_increasing()

    def negated(self) -> "EffectiveStream":
        return EffectiveStream(self.contract.negated(), self.collateral.negated(), self.rates)


def effective_stream(contract: Contract, C: CollateralSpec, rates: RateModel) -> EffectiveStream:
    return EffectiveStream(contract, C, rates)


def probe_spots(asset: AssetModel, n: int = 65) -> np.ndarray:
    lo, hi = asset.domain
    hi = 4.0 * asset.s0 if not np.isfinite(hi) else hi
    lo = max(lo, 1e-6 * asset.s0)
    return np.linspace(lo, hi, n)


def validate_model(rates: RateModel, asset: AssetModel | None = None,
                   contract: Contract | None = None, C: CollateralSpec | None = None) -> list[str]:
    """List every violated modelling assumption; an empty list means valid."""
    out = rates.violations()
    T = rates.horizon
    ts = np.array([0.0, *rates.breakpoints()])
    spots = probe_spots(asset) if asset is not None else np.linspace(1e-3, 400.0, 65)
    if asset is not None:
        if asset.beta is not None:
            beta = asset.beta(ts)
            if np.any(rates.r_b(ts) > beta):
                out.append("r_b ≤ beta")
            if any(np.any(beta > c(ts)) for c in rates.r_ib):
                out.append("beta ≤ r_ib")
        lo, hi = asset.domain
        if not lo < asset.s0 < hi:
            out.append("s0 inside domain")
        for t in (0.0, 0.5 * T, T):
            sig = np.asarray(asset.sigma(t, spots), dtype=float)
            if not np.all(np.isfinite(sig)) or np.any(sig <= 0.0):
                out.append("sigma > 0 on domain")
                break
    if contract is not None:
        times = contract.flow_times
        if any(not 0.0 < t <= T + _T_EPS for t in times):
            out.append("flow times in (0, T]")
        if any(b <= a for a, b in zip(times[:-1], times[1:])):
            out.append("flow times strictly increasing")
        values = [f(spots) for _, f in contract.dated_flows] + [contract.terminal(spots)]
        values += [contract.flow_rate(t, spots) for t in (0.0, 0.5 * T)]
        if not all(np.all(np.isfinite(v)) for v in values):
            out.append("flows bounded")
    if C is not None:
        if np.any(np.abs(C(T, spots)) > 0.0):
            out.append("C_T = 0")
        if not np.all(np.isfinite(C.running(0.0, spots))):
            out.append("collateral bounded")
    return out
