"""Delta hedging along simulated paths, rebalanced at the surface hedge.

The plain Euler rebalancing error shrinks like sqrt(dt). Adding the
second-order gamma term makes it shrink like dt.

    python demos/04_replication.py
"""

import numpy as np

from bilateral_pricing import (AssetModel, CollateralSpec, Contract, GridSpec, RateModel, simulate_paths,
                               simulate_replication, solve_hedger_pde)

asset = AssetModel.lognormal(100.0, 0.2)
rates = RateModel.constant(0.01, 0.05, 0.06)
contract = Contract(payoff=lambda s: np.maximum(s - 100.0, 0.0))
surf = solve_hedger_pde(rates, asset, contract, CollateralSpec.zero(), 1.0, GridSpec.around(100.0, 801, 800))
times, S = simulate_paths(asset, rates, 1000, 400, np.random.default_rng(7))

print(f"{'steps':>6} {'euler':>10} {'milstein':>10}")
ns, res = [25, 50, 100, 200, 400], {"euler": [], "milstein": []}
for n in ns:
    k = 400 // n
    for scheme in res:
        wp = simulate_replication(surf, rates, asset, contract, None, 1.0, (times[::k], S[:, ::k]), scheme=scheme)
        res[scheme].append(np.mean(np.abs(wp.e_T)))
    print(f"{n:>6} {res['euler'][-1]:10.4f} {res['milstein'][-1]:10.4f}")
for scheme, errs in res.items():
    order = np.polyfit(np.log(1.0 / np.array(ns)), np.log(errs), 1)[0]
    print(f"{scheme} order {order:.2f}")
