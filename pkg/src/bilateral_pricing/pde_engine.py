"""Finite-difference solver for the hedger's and counterparty's pricing PDEs.

The unknown is the price u = v - C, which solves

    u_t + 1/2 sigma^2 u_ss + (beta s - kappa) u_s = G(t, s, u + C, u_s) + a - r_c C

backwards from u(T-) = H - (flows at T), where G is g_h or g_c. Across a
dated flow f received by the hedger, u(t-) = u(t+) - f. Collateral jumps
cancel in u, so they need no special treatment.

Time stepping is Crank-Nicolson with a Rannacher start after every jump.
The nonlinear driver is handled by Picard iteration within each step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import solve_banded

from .drivers import DriverQuery, g_c, g_h
from .errors import ConfigurationError, DomainError, NumericalError
from .market_model import (AssetModel, CollateralSpec, Contract, EffectiveStream,
                           RateModel, account_value, effective_stream, endowment_value,
                           time_grid)

_EPS = 1e-12


@dataclass(frozen=True)
class GridSpec:
    s_min: float
    s_max: float
    n_space: int = 200
    n_time: int = 200
    stretching: str = "uniform"
    boundary: str = "linearity"
    picard_tol: float = 1e-12
    picard_max: int = 50
    rannacher_steps: int = 2

    @classmethod
    def around(cls, s0: float, n_space: int = 200, n_time: int = 200, width: float = 4.0, **kw):
        """Uniform grid on [0, width * s0]."""
        return cls(0.0, width * s0, n_space, n_time, **kw)

    def spots(self) -> np.ndarray:
        if self.stretching == "uniform":
            return np.linspace(self.s_min, self.s_max, self.n_space)
        if self.stretching == "log":
            return np.geomspace(self.s_min, self.s_max, self.n_space)
        raise ConfigurationError(f"unknown stretching {self.stretching!r}")

    def check(self, asset: AssetModel) -> None:
        if self.n_space < 16 or self.n_time < 16:
            raise ConfigurationError(
                f"grid {self.n_space}x{self.n_time} too coarse; need at least 16 nodes in space and time")
        if not self.s_min < asset.s0 < self.s_max:
            raise ConfigurationError(f"s0={asset.s0} not inside ({self.s_min}, {self.s_max})")
        if self.stretching == "log" and self.s_min <= 0.0:
            raise ConfigurationError("log stretching needs s_min > 0")
        if self.boundary not in ("linearity", "dirichlet-discounted"):
            raise ConfigurationError(f"unknown boundary condition {self.boundary!r}")

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.s_min, self.s_max, (self.n_space - 1) * factor + 1, self.n_time * factor,
                        self.stretching, self.boundary, self.picard_tol, self.picard_max,
                        self.rannacher_steps)


@dataclass(frozen=True)
class ValueSurface:
    """Solved surface on a (time, spot) grid.

    ``v`` and ``delta`` hold left limits in time (cum-flow), so v(T, s) is
    the terminal payoff. ``v_ex`` and ``delta_ex`` hold right limits
    (ex-flow). They differ only on flow dates and at T. ``delta`` is the
    spot derivative of the price u = v - C, which is the hedge ratio.
    """

    times: np.ndarray
    spots: np.ndarray
    v: np.ndarray
    delta: np.ndarray
    v_ex: np.ndarray
    delta_ex: np.ndarray
    collateral: CollateralSpec
    side: str = "hedger"
    x: float = 0.0
    iterations: int = 0
    _interp: dict = field(default_factory=dict, repr=False, compare=False)

    def price_grid(self, ex: bool = True) -> np.ndarray:
        """u = v - C on the grid."""
        v = self.v_ex if ex else self.v
        C = np.array([self.collateral(t, self.spots) for t in self.times])
        return v - C

    def interpolator(self, name: str) -> RegularGridInterpolator:
        """Bilinear interpolant of v, v_ex, delta, delta_ex, or of the price u, u_ex.

        Prices are continuous in time across collateral moves, so sampling
        u between time nodes avoids smearing the return of collateral at T.
        """
        if name not in self._interp:
            if name in ("u", "u_ex"):
                values = self.price_grid(ex=name == "u_ex")
            else:
                values = getattr(self, name)
            self._interp[name] = RegularGridInterpolator(
                (self.times, self.spots), values, method="linear", bounds_error=True)
        return self._interp[name]

    def sample(self, name: str, t, s) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if np.any(s < self.spots[0] - _EPS) or np.any(s > self.spots[-1] + _EPS):
            raise DomainError(f"spot outside grid hull [{self.spots[0]}, {self.spots[-1]}]")
        if np.any(t < self.times[0] - _EPS) or np.any(t > self.times[-1] + _EPS):
            raise DomainError(f"time outside grid hull [{self.times[0]}, {self.times[-1]}]")
        t, s = np.broadcast_arrays(t, s)
        pts = np.stack([np.clip(t, self.times[0], self.times[-1]),
                        np.clip(s, self.spots[0], self.spots[-1])], axis=-1)
        return self.interpolator(name)(pts.reshape(-1, 2)).reshape(t.shape)

    def gamma(self, ex: bool = True) -> np.ndarray:
        return np.gradient(self.delta_ex if ex else self.delta, self.spots, axis=1)


def _d1_weights(s: np.ndarray):
    """Centred first-derivative weights on a nonuniform grid (interior rows)."""
    hm = s[1:-1] - s[:-2]
    hp = s[2:] - s[1:-1]
    lo = -hp / (hm * (hm + hp))
    mid = (hp - hm) / (hm * hp)
    up = hm / (hp * (hm + hp))
    return lo, mid, up


def _d2_weights(s: np.ndarray):
    hm = s[1:-1] - s[:-2]
    hp = s[2:] - s[1:-1]
    lo = 2.0 / (hm * (hm + hp))
    mid = -2.0 / (hm * hp)
    up = 2.0 / (hp * (hm + hp))
    return lo, mid, up


def _one_sided(h1: float, h2: float):
    """Second-order weights for u'(0) from values at offsets 0, h1, h2."""
    return (-(h1 + h2) / (h1 * h2), h2 / (h1 * (h2 - h1)), -h1 / (h2 * (h2 - h1)))


def spot_derivative(u: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Centred differences inside, one-sided second-order at both ends."""
    out = np.empty_like(u)
    lo, mid, up = _d1_weights(s)
    out[1:-1] = lo * u[:-2] + mid * u[1:-1] + up * u[2:]
    w = _one_sided(s[1] - s[0], s[2] - s[0])
    out[0] = w[0] * u[0] + w[1] * u[1] + w[2] * u[2]
    w = _one_sided(s[-2] - s[-1], s[-3] - s[-1])
    out[-1] = w[0] * u[-1] + w[1] * u[-2] + w[2] * u[-3]
    return out


class _Stepper:
    """Backward theta-steps for one model on one spatial grid."""

    def __init__(self, rates: RateModel, asset: AssetModel, stream: EffectiveStream,
                 x: float, side: str, grid: GridSpec, s: np.ndarray):
        self.rates, self.asset, self.stream = rates, asset, stream
        self.x, self.grid, self.s = x, grid, s
        self.generator = g_h if side == "hedger" else g_c
        self.d1 = _d1_weights(s)
        self.d2 = _d2_weights(s)
        n = s.size
        self.n = n
        # linear extrapolation weights for the boundary rows
        lam0 = (s[1] - s[0]) / (s[2] - s[1])
        lamN = (s[-1] - s[-2]) / (s[-2] - s[-3])
        self.bc = ((1.0 + lam0, -lam0), (1.0 + lamN, -lamN))
        self.max_iterations = 0

    def operator(self, t: float):
        """Interior tridiagonal coefficients of L at time t."""
        si = self.s[1:-1]
        diff = 0.5 * np.asarray(self.asset.sigma(t, si), dtype=float) ** 2
        adv = self.asset.aux_drift(t, si, self.rates)
        lo = diff * self.d2[0] + adv * self.d1[0]
        mid = diff * self.d2[1] + adv * self.d1[1]
        up = diff * self.d2[2] + adv * self.d1[2]
        return lo, mid, up

    def apply(self, coeffs, u: np.ndarray) -> np.ndarray:
        lo, mid, up = coeffs
        out = np.zeros_like(u)
        out[1:-1] = lo * u[:-2] + mid * u[1:-1] + up * u[2:]
        return out

    def source(self, t: float, u: np.ndarray) -> np.ndarray:
        """Driver plus running flows at time t, on every node."""
        C = self.stream.collateral.running(t, self.s)
        z = spot_derivative(u, self.s)
        q = DriverQuery(t=t, s=self.s, y=u + C, z=z, x=self.x)
        return self.generator(q, self.rates, self.asset) + self.stream.density(t, self.s)

    def boundary_values(self, t: float):
        if self.grid.boundary != "dirichlet-discounted":
            return None
        ends = self.s[[0, -1]]
        h = -self.stream.jump(self.rates.horizon, ends)
        lend = account_value(self.rates, "lend", t) / account_value(self.rates, "lend", self.rates.horizon)
        borrow = account_value(self.rates, "borrow", t) / account_value(self.rates, "borrow", self.rates.horizon)
        return np.where(h >= 0.0, h * lend, h * borrow)

    def step(self, u1: np.ndarray, t0: float, t1: float, theta: float) -> np.ndarray:
        dt = t1 - t0
        L0 = self.operator(t0)
        n = self.n
        ab = np.zeros((5, n))
        lo, mid, up = L0
        ab[2, 1:-1] = 1.0 - theta * dt * mid
        ab[1, 2:] = -theta * dt * up
        ab[3, :-2] = -theta * dt * lo
        bvals = self.boundary_values(t0)
        if bvals is None:
            (a0, b0), (aN, bN) = self.bc
            ab[2, 0], ab[1, 1], ab[0, 2] = 1.0, -a0, -b0
            ab[2, -1], ab[3, -2], ab[4, -3] = 1.0, -aN, -bN
        else:
            ab[2, 0] = ab[2, -1] = 1.0
        base = u1.copy()
        G1 = None
        if theta < 1.0:
            base += (1.0 - theta) * dt * self.apply(self.operator(t1), u1)
            G1 = self.source(t1, u1)
            base -= (1.0 - theta) * dt * G1
        scale = max(1.0, float(np.max(np.abs(u1))))
        u0 = u1
        for it in range(1, self.grid.picard_max + 1):
            rhs = base - theta * dt * self.source(t0, u0)
            if bvals is None:
                rhs[0] = rhs[-1] = 0.0
            else:
                rhs[0], rhs[-1] = bvals
            new = solve_banded((2, 2), ab, rhs)
            err = float(np.max(np.abs(new - u0)))
            u0 = new
            if err <= self.grid.picard_tol * scale:
                self.max_iterations = max(self.max_iterations, it)
                return u0
        raise NumericalError(
            f"Picard iteration did not converge on [{t0:.6g}, {t1:.6g}]",
            {"t0": t0, "t1": t1, "last_update": err, "tolerance": self.grid.picard_tol * scale,
             "iterations": self.grid.picard_max})


def _solve(rates: RateModel, asset: AssetModel, contract: Contract, C: CollateralSpec,
           x, grid: GridSpec, side: str) -> ValueSurface:
    grid.check(asset)
    if rates.n_assets != 1:
        raise ConfigurationError("the PDE solver handles a single risky asset")
    x = endowment_value(x)
    stream = effective_stream(contract, C, rates)
    s = grid.spots()
    T = rates.horizon
    times = time_grid(T, grid.n_time, [*contract.flow_times, *rates.breakpoints()])
    jump_idx = {int(np.argmin(np.abs(times - tk))) for tk in contract.flow_times if tk < T - _EPS}
    stepper = _Stepper(rates, asset, stream, x, side, grid, s)

    nt = times.size
    v = np.empty((nt, s.size))
    v_ex = np.empty_like(v)
    delta = np.empty_like(v)
    delta_ex = np.empty_like(v)

    u = np.zeros_like(s)
    v_ex[-1] = u + C(T, s)
    delta_ex[-1] = 0.0
    u = u - stream.jump(T, s)
    v[-1] = u + C(T, s)
    delta[-1] = spot_derivative(u, s)

    since_restart = 0
    for n in range(nt - 2, -1, -1):
        t0, t1 = times[n], times[n + 1]
        if since_restart < grid.rannacher_steps:
            mid = 0.5 * (t0 + t1)
            u = stepper.step(stepper.step(u, mid, t1, 1.0), t0, mid, 1.0)
        else:
            u = stepper.step(u, t0, t1, 0.5)
        since_restart += 1
        Cn = C(t0, s)
        v_ex[n] = u + Cn
        delta_ex[n] = spot_derivative(u, s)
        if n in jump_idx:
            u = u - stream.jump(times[n], s)
            since_restart = 0
        v[n] = u + Cn
        delta[n] = spot_derivative(u, s)
        if not np.all(np.isfinite(u)):
            raise NumericalError("non-finite values in the PDE solution", {"t": t0})

    return ValueSurface(times, s, v, delta, v_ex, delta_ex, C, side, x, stepper.max_iterations)


def solve_hedger_pde(rates: RateModel, asset: AssetModel, contract: Contract,
                     C: CollateralSpec, x1, grid: GridSpec) -> ValueSurface:
    """Surface of v = P^h(x1, A, C) + C."""
    return _solve(rates, asset, contract, C, x1, grid, "hedger")


def solve_counterparty_pde(rates: RateModel, asset: AssetModel, contract: Contract,
                           C: CollateralSpec, x2, grid: GridSpec) -> ValueSurface:
    """Surface of v = P^c(x2, -A, -C) + C, driven by g_c and the same stream."""
    return _solve(rates, asset, contract, C, x2, grid, "counterparty")


def price_at(surface: ValueSurface, t: float, s, C: CollateralSpec | None = None):
    """Ex-dividend price at (t, s) by bilinear interpolation of u = v - C.

    ``C`` overrides the surface's collateral: the result is then v - C(t, s).
    """
    if C is None:
        out = surface.sample("u_ex", t, s)
    else:
        out = surface.sample("v_ex", t, s) - C(t, np.asarray(s, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def write_surface_csv(surface: ValueSurface, path) -> None:
    """Rows t,s,v,delta ordered by time then spot, 12 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "s", "v", "delta"])
        for j, t in enumerate(surface.times):
            for i, s in enumerate(surface.spots):
                w.writerow([f"{t:.12g}", f"{s:.12g}", f"{surface.v[j, i]:.12g}",
                            f"{surface.delta[j, i]:.12g}"])
