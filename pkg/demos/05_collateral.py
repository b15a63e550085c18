"""How posting collateral changes the price of a sold call.

The hedger posts a fraction of the call's intrinsic value as collateral,
remunerated at r_c = 2%, between the lending and borrowing rates. The
table shows both prices and the width of the fair range as the posted
fraction grows.

    python demos/05_collateral.py
"""

import numpy as np

from bilateral_pricing import (AssetModel, CollateralSpec, Contract, GridSpec, RateModel, price_at,
                               solve_counterparty_pde, solve_hedger_pde)

asset = AssetModel.lognormal(100.0, 0.2)
rates = RateModel.constant(0.01, 0.05, 0.06, r_c=0.02)
contract = Contract(payoff=lambda s: np.maximum(s - 100.0, 0.0))
grid = GridSpec.around(100.0, 201, 200)

print(f"{'fraction':>8} {'ph':>10} {'pc':>10} {'width':>10}")
for q in (0.0, 0.25, 0.5, 1.0):
    C = CollateralSpec(lambda t, s, q=q: -q * np.maximum(s - 100.0, 0.0), rates.horizon)
    ph = price_at(solve_hedger_pde(rates, asset, contract, C, 0.0, grid), 0.0, 100.0)
    pc = price_at(solve_counterparty_pde(rates, asset, contract, C, 0.0, grid), 0.0, 100.0)
    print(f"{q:8.2f} {ph:10.5f} {pc:10.5f} {ph - pc:10.5f}")
