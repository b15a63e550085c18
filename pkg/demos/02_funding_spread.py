"""A sold call hedged by a trader who lends at 1% and borrows at 5%.

The hedger needs to borrow to buy the stock, so the hedger's price sits
above the linear price. The counterparty faces the opposite stream and
its price sits below. The gap between them is the fair bilateral range.
Writes the price surfaces and the endowment sweep as CSV for plotting.

    python demos/02_funding_spread.py [output_dir]
"""

import sys
from pathlib import Path

import numpy as np

from bilateral_pricing import (AssetModel, CollateralSpec, Contract, GridSpec, Model, PDESolver, RateModel,
                               bilateral_range, endowment_sweep, price_at, solve_counterparty_pde,
                               solve_hedger_pde)
from bilateral_pricing.pde_engine import write_surface_csv

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(exist_ok=True)

asset = AssetModel.lognormal(100.0, 0.2)
rates = RateModel.constant(0.01, 0.05, 0.06)
contract = Contract(payoff=lambda s: np.maximum(s - 100.0, 0.0))
grid = GridSpec.around(100.0, 201, 200)
C = CollateralSpec.zero()

linear = {r: price_at(solve_hedger_pde(RateModel.constant(r, r, r), asset, contract, C, 0.0, grid), 0.0, 100.0)
          for r in (0.01, 0.05)}
h = solve_hedger_pde(rates, asset, contract, C, 0.0, grid)
c = solve_counterparty_pde(rates, asset, contract, C, 0.0, grid)
ph, pc = price_at(h, 0.0, 100.0), price_at(c, 0.0, 100.0)
rng = bilateral_range(ph, pc, 1e-10)
print(f"linear prices at 1% and 5%: {linear[0.01]:.4f}, {linear[0.05]:.4f}")
print(f"hedger {ph:.4f}, counterparty {pc:.4f}: {rng.classification} range, case {rng.case}")
write_surface_csv(h, out / "surface_h.csv")
write_surface_csv(c, out / "surface_c.csv")

print("\nendowment sweep (x1 = x2 = x)")
rep = endowment_sweep(Model(rates, asset), contract, C, [-10, -1, -0.1, 0, 0.1, 1, 10], PDESolver(grid),
                      1e-8, workers=4)
for x, a, b in rep.rows():
    print(f"  x={x:6.1f}  ph={a:.6f}  pc={b:.6f}")
print(f"monotone: {rep.hedger_monotone and rep.counterparty_monotone}, nested in the x=0 range: {rep.nested}")
with open(out / "sweep.csv", "w") as fh:
    fh.write("x,ph,pc\n")
    for x, a, b in rep.rows():
        fh.write(f"{x:.12g},{a:.12g},{b:.12g}\n")
