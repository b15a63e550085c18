"""Two contracts where the hedger's price is below the counterparty's.

A lender (x1 > 0) and a borrower (x2 < 0) value cash at different rates.
If the hedger receives a payment the borrower values it more, so both
sides can gain from the trade and a third party could resell it.

    python demos/03_profitable_ranges.py
"""

from bilateral_pricing import (AssetModel, CollateralSpec, CounterexampleSpec, GridSpec, Model, PDESolver,
                               RateModel, bilateral_range, cash_price, counterexample_increasing,
                               counterexample_kappa, replicate_increasing)

rates = RateModel.constant(0.01, 0.05)
model = Model(rates, AssetModel.lognormal(100.0, 0.2))
pde = PDESolver(GridSpec.around(100.0, 41, 400))
x1, x2 = 1.0, -1.0

print("single payment of 0.5 to the hedger at t = 0.5")
ce = counterexample_increasing(x1, x2, rates, 0.5, 0.5)
errs = replicate_increasing(x1, x2, rates, 0.5, 0.5)
print(f"  closed form  ph0 = {ce.ph0:.7f}  pc0 = {ce.pc0:.7f}")
print(f"  PDE          ph0 = {pde.price(model, ce.contract, CollateralSpec.zero(), x1):.7f}"
      f"  pc0 = {pde.price(model, ce.contract, CollateralSpec.zero(), x2, 'counterparty'):.7f}")
print(f"  cash strategies end with errors {errs[0]:.1e}, {errs[1]:.1e}")
print(f"  {bilateral_range(*ce).classification}\n")

print("hedger pays 0.5 at t = 0.5 and receives 0.5 e^{0.03 * 0.5} at T")
spec = CounterexampleSpec(0.5, 0.03, 0.5)
ce = counterexample_kappa(x1, x2, rates, spec)
print(f"  closed form  ph0 = {ce.ph0:.7f}  pc0 = {ce.pc0:.7f}")
print(f"  cash route   ph0 = {cash_price(ce.contract, CollateralSpec.zero(), rates, x1):.7f}"
      f"  pc0 = {cash_price(ce.contract, CollateralSpec.zero(), rates, x2, 'counterparty'):.7f}")
r = bilateral_range(*ce)
print(f"  {r.classification}, case {r.case}")
print(f"  feasible alpha up to {min(v for k, v in spec.alpha_bounds(x1, x2, rates).items() if 'lower' not in k):.7f}")
