"""Bilateral pricing of contracts under asymmetric funding rates and collateral."""

from .analysis import (Counterexample, CounterexampleSpec, LatticeSolver, Model, PDESolver,
                       PriceRange, bilateral_range, counterexample_increasing,
                       counterexample_kappa, discretization_error, endowment_sweep,
                       homogeneity_check, replicate_increasing, stability_estimate)
from .drivers import (DriverQuery, driver_gap_borrow, driver_gap_mixed, f_b, f_l, f_tilde, g,
                      g_c, g_h, g_variants)
from .errors import ConfigurationError, DomainError, NumericalError
from .lattice_bsde import build_lattice, cross_check, solve_bsde
from .market_model import (AssetModel, CollateralSpec, Contract, PiecewiseConstant, RateModel,
                           account_value, effective_stream, trivial_wealth, validate_model)
from .pde_engine import GridSpec, ValueSurface, price_at, solve_counterparty_pde, solve_hedger_pde
from .scenario import Scenario, load_scenario, parse_scenario
from .strategy import (arbitrage_diagnostic, cash_price, extract_strategy, netted_wealth_U,
                       simulate_paths, simulate_replication)

__version__ = "0.1.0"
