"""With one rate for lending, borrowing and stock funding the pricing
equations are linear and both solvers should land on the Black-Scholes value.

    python demos/01_black_scholes_recovery.py
"""

import time

import numpy as np
from scipy.stats import norm

from bilateral_pricing import (AssetModel, CollateralSpec, Contract, GridSpec, RateModel, build_lattice,
                               effective_stream, price_at, solve_bsde, solve_hedger_pde)


def black_scholes_call(s, k, r, vol, T):
    d1 = (np.log(s / k) + (r + 0.5 * vol ** 2) * T) / (vol * np.sqrt(T))
    return s * norm.cdf(d1) - k * np.exp(-r * T) * norm.cdf(d1 - vol * np.sqrt(T))


rates = RateModel.constant(0.03, 0.03, 0.03)
asset = AssetModel.lognormal(100.0, 0.2)
contract = Contract(payoff=lambda s: np.maximum(s - 100.0, 0.0))
exact = black_scholes_call(100.0, 100.0, 0.03, 0.2, 1.0)
print(f"analytic call value {exact:.6f}\n")

print(f"{'resolution':>10} {'PDE':>10} {'rel err':>10} {'lattice':>10} {'rel err':>10}")
for n in (50, 100, 200, 400):
    t0 = time.perf_counter()
    surf = solve_hedger_pde(rates, asset, contract, CollateralSpec.zero(), 0.0, GridSpec.around(100.0, n, n))
    pde = price_at(surf, 0.0, 100.0)
    lat = build_lattice(asset, rates, n)
    tree = solve_bsde(lat, effective_stream(contract, CollateralSpec.zero(), rates), 0.0).price
    print(f"{n:>10} {pde:10.6f} {pde / exact - 1:10.2e} {tree:10.6f} {tree / exact - 1:10.2e}"
          f"   ({time.perf_counter() - t0:.2f}s)")
