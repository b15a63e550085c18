"""Trinomial-lattice solver for the pricing BSDEs, used as an independent oracle.

Nodes sit on a log-spaced recombining grid s0 * exp(k dx). At each node the
branch probabilities match the conditional mean and variance of the spot
increment under the auxiliary measure exactly. The backward recursion is
implicit in Y and explicit in Z, with Z given by the covariance ratio
E[Y' dS] / E[dS^2].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .drivers import DriverQuery, g_c, g_h
from .errors import ConfigurationError, NumericalError
from .market_model import AssetModel, EffectiveStream, RateModel, endowment_value, time_grid
from .pde_engine import ValueSurface

_EPS = 1e-12


@dataclass(frozen=True)
class Lattice:
    times: np.ndarray
    dx: float
    s0: float
    spots: tuple[np.ndarray, ...]
    p_up: tuple[np.ndarray, ...]
    p_mid: tuple[np.ndarray, ...]
    p_down: tuple[np.ndarray, ...]
    mean: tuple[np.ndarray, ...]
    variance: tuple[np.ndarray, ...]
    rates: RateModel
    asset: AssetModel

    @property
    def steps(self) -> int:
        return self.times.size - 1


def build_lattice(asset: AssetModel, rates: RateModel, steps: int,
                  breakpoints=(), spacing: float | None = None) -> Lattice:
    """Trinomial lattice with ``steps`` time steps on [0, T].

    ``breakpoints`` (typically the dated-flow times) become lattice times.
    The default spacing is dx = vol * sqrt(3 dt) with vol the local
    lognormal volatility at the root.
    """
    if steps < 1:
        raise ConfigurationError("the lattice needs at least one step")
    T = rates.horizon
    times = time_grid(T, steps, [*breakpoints, *rates.breakpoints()])
    dts = np.diff(times)
    s0 = float(asset.s0)
    if spacing is None:
        vol = float(asset.sigma(0.0, np.array([s0]))[0]) / s0
        spacing = vol * np.sqrt(3.0 * dts.max())
    dx = float(spacing)
    if not dx > 0.0:
        raise ConfigurationError("lattice spacing must be positive")
    up, dn = np.exp(dx), np.exp(-dx)
    spots, pu_l, pm_l, pd_l, mean_l, var_l = [], [], [], [], [], []
    for j, t in enumerate(times):
        s = s0 * np.exp(dx * np.arange(-j, j + 1))
        spots.append(s)
        if j == times.size - 1:
            break
        dt = dts[j]
        m = asset.aux_drift(t, s, rates) * dt
        v = np.asarray(asset.sigma(t, s), dtype=float) ** 2 * dt
        a, b = s * (up - 1.0), s * (dn - 1.0)
        m2 = v + m * m
        pu = (m2 - m * b) / (a * (a - b))
        pd = (m2 - m * a) / (b * (b - a))
        pm = 1.0 - pu - pd
        bad = (pu < -_EPS) | (pd < -_EPS) | (pm < -_EPS) | ~np.isfinite(pm)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise ConfigurationError(
                f"moment matching infeasible at level {j}, node {k - j} (t={t:.6g}, s={s[k]:.6g}); "
                f"probabilities ({pu[k]:.3g}, {pm[k]:.3g}, {pd[k]:.3g})")
        pu_l.append(pu)
        pm_l.append(pm)
        pd_l.append(pd)
        mean_l.append(m)
        var_l.append(v)
    return Lattice(times, dx, s0, tuple(spots), tuple(pu_l), tuple(pm_l), tuple(pd_l),
                   tuple(mean_l), tuple(var_l), rates, asset)


@dataclass(frozen=True)
class LatticeSolution:
    """Y = u + C and Z per level. ``Y`` holds left limits in time, ``Y_ex`` right limits."""

    times: np.ndarray
    spots: tuple[np.ndarray, ...]
    Y: tuple[np.ndarray, ...]
    Y_ex: tuple[np.ndarray, ...]
    Z: tuple[np.ndarray, ...]
    side: str
    x: float
    root_collateral: float = 0.0

    @property
    def price(self) -> float:
        """Ex-dividend price at the root."""
        return float(self.Y_ex[0][0]) - self.root_collateral


def _solve_implicit(E, dt, f, scale_hint):
    """Solve y - E + dt * f(y) = 0 node by node; f is piecewise linear and nondecreasing."""
    y = E - dt * f(E)
    for _ in range(100):
        h = 1e-7 * np.maximum(1.0, np.abs(y))
        F = y - E + dt * f(y)
        slope = 1.0 + dt * (f(y + h) - f(y - h)) / (2.0 * h)
        new = y - F / slope
        done = np.abs(new - y) <= 1e-13 * np.maximum(1.0, np.abs(new))
        y = new
        if np.all(done):
            resid = np.abs(y - E + dt * f(y))
            if np.all(resid <= 1e-11 * np.maximum(1.0, scale_hint)):
                return y
            break
    raise NumericalError("implicit lattice step failed to converge",
                         {"max_residual": float(np.max(np.abs(y - E + dt * f(y))))})


def solve_bsde(lattice: Lattice, stream: EffectiveStream, x=0.0, side: str = "hedger") -> LatticeSolution:
    """Backward induction for the hedger (g_h) or counterparty (g_c) equation."""
    x = endowment_value(x)
    generator = g_h if side == "hedger" else g_c
    rates, asset, C = lattice.rates, lattice.asset, stream.collateral
    times = lattice.times
    N = lattice.steps
    flow_idx = {int(np.argmin(np.abs(times - tk))) for tk in stream.contract.flow_times
                if tk < rates.horizon - _EPS}
    unmatched = [tk for tk in stream.contract.flow_times
                 if np.min(np.abs(times - tk)) > 1e-9]
    if unmatched:
        raise ConfigurationError(f"flow dates {unmatched} are not lattice times")

    Y = [None] * (N + 1)
    Y_ex = [None] * (N + 1)
    Z = [None] * (N + 1)
    s = lattice.spots[N]
    Y_ex[N] = C(times[N], s)
    u = -stream.jump(times[N], s)
    Y[N] = u + C(times[N], s)
    Z[N] = np.zeros_like(s)
    for j in range(N - 1, -1, -1):
        t, dt = times[j], times[j + 1] - times[j]
        s = lattice.spots[j]
        pu, pm, pd = lattice.p_up[j], lattice.p_mid[j], lattice.p_down[j]
        up, mid, dn = u[2:], u[1:-1], u[:-2]
        E = pu * up + pm * mid + pd * dn
        m = lattice.mean[j]
        a = s * (np.exp(lattice.dx) - 1.0) - m
        b = s * (np.exp(-lattice.dx) - 1.0) - m
        z = (pu * up * a - pm * mid * m + pd * dn * b) / lattice.variance[j]
        c_run = C.running(t, s)
        dens = stream.density(t, s)

        def f(y, z=z, s=s, t=t, c_run=c_run, dens=dens):
            return generator(DriverQuery(t=t, s=s, y=y + c_run, z=z, x=x), rates, asset) + dens

        u = _solve_implicit(E, dt, f, float(np.max(np.abs(E))) if E.size else 1.0)
        Z[j] = z
        Y_ex[j] = u + C(t, s)
        if j in flow_idx:
            u = u - stream.jump(t, s)
        Y[j] = u + C(t, s)
    root_c = float(C(0.0, lattice.spots[0])[0])
    return LatticeSolution(times, lattice.spots, tuple(Y), tuple(Y_ex), tuple(Z), side, x, root_c)


@dataclass(frozen=True)
class CrossCheckReport:
    max_diff: float
    price_scale: float
    relative: float
    n_compared: int
    passed: bool


def cross_check(surface: ValueSurface, lat: LatticeSolution, tol: float = 5e-3,
                window: tuple[float, float] | None = None) -> CrossCheckReport:
    """Max |v - Y| over lattice nodes inside the surface hull and the spot window.

    Between PDE time nodes the price u = v - C is interpolated and the
    collateral is added back at the lattice node.

    The default window is [s0 / 2, 2 s0] around the lattice root. ``tol`` is
    relative to the price scale, the largest |Y| among compared nodes.
    """
    s0 = float(lat.spots[0][0])
    lo, hi = window if window is not None else (0.5 * s0, 2.0 * s0)
    lo, hi = max(lo, surface.spots[0]), min(hi, surface.spots[-1])
    diffs, scale, count = [0.0], [0.0], 0
    for t, s, y in zip(lat.times, lat.spots, lat.Y):
        keep = (s >= lo) & (s <= hi)
        if not np.any(keep):
            continue
        u = surface.sample("u", t, s[keep]) + surface.collateral(t, s[keep])
        diffs.append(float(np.max(np.abs(u - y[keep]))))
        scale.append(float(np.max(np.abs(y[keep]))))
        count += int(keep.sum())
    max_diff, price_scale = max(diffs), max(scale)
    rel = max_diff / price_scale if price_scale > 0 else max_diff
    return CrossCheckReport(max_diff, price_scale, rel, count, rel <= tol or max_diff == 0.0)


def write_lattice_csv(sol: LatticeSolution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "s", "Y", "Z"])
        for t, s, y, z in zip(sol.times, sol.spots, sol.Y, sol.Z):
            for a, b, c in zip(s, y, z):
                w.writerow([f"{t:.12g}", f"{a:.12g}", f"{b:.12g}", f"{c:.12g}"])
