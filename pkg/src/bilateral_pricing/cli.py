"""Command-line front end: bilateral-pricing --config scenario.json --mode price --out results/"""

from __future__ import annotations

import argparse
import csv
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from .analysis import (CounterexampleSpec, Model, PDESolver, bilateral_range, counterexample_increasing,
                       counterexample_kappa, discretization_error, endowment_sweep,
                       homogeneity_check, replicate_increasing)
from .drivers import driver_gap_borrow, driver_gap_mixed
from .errors import ConfigurationError, DomainError, NumericalError
from .lattice_bsde import build_lattice, cross_check, solve_bsde
from .market_model import CollateralSpec, account_value, effective_stream, validate_model
from .pde_engine import GridSpec, price_at, write_surface_csv
from .scenario import Scenario, load_scenario, spot_bounds
from .strategy import cash_price

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
TOL_FLOOR = 1e-10


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return f"{float(v):.12g}"


def _grid(arg: str | None, scenario: Scenario) -> GridSpec:
    n, m = 201, 200
    if arg:
        try:
            n, m = (int(a) for a in arg.lower().split("x"))
        except ValueError:
            raise ConfigurationError(f"--grid expects NxM, got {arg!r}") from None
    lo, hi = spot_bounds(scenario)
    return GridSpec(lo, hi, n, m)


class _Run:
    """Collects artifacts in memory and writes them to a fresh directory at the end."""

    def __init__(self, scenario: Scenario, args):
        self.sc = scenario
        self.args = args
        self.model = Model(scenario.rates, scenario.asset)
        self.grid = _grid(args.grid, scenario)
        self.lines: list[str] = []
        self.failed = False
        self.files: dict[str, callable] = {}

    def say(self, text: str) -> None:
        self.lines.append(text)
        print(text)

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.failed |= not ok
        self.say(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else ""))

    def tolerance(self, x1: float, x2: float) -> float:
        if self.args.tol is not None:
            return self.args.tol
        sc = self.sc
        err = max(discretization_error(self.model, sc.contract, sc.collateral, x1, "hedger", self.grid),
                  discretization_error(self.model, sc.contract, sc.collateral, x2, "counterparty", self.grid))
        return max(5.0 * err, TOL_FLOOR)

    def price_rows(self, rows):
        def write(path):
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["scenario", "x1", "x2", "ph", "pc", "classification", "case"])
                for r in rows:
                    w.writerow([r[0], *(_fmt(v) for v in r[1:5]), r[5], r[6] or ""])
        self.files["prices.csv"] = write


def _price(run: _Run) -> None:
    sc = run.sc
    sh = PDESolver(run.grid).surface(run.model, sc.contract, sc.collateral, sc.x1, "hedger")
    scp = PDESolver(run.grid).surface(run.model, sc.contract, sc.collateral, sc.x2, "counterparty")
    ph = price_at(sh, 0.0, sc.asset.s0)
    pc = price_at(scp, 0.0, sc.asset.s0)
    tol = run.args.tol if run.args.tol is not None else TOL_FLOOR
    rng = bilateral_range(ph, pc, tol)
    run.say(f"scenario {sc.name}: x1={_fmt(sc.x1)} x2={_fmt(sc.x2)}")
    run.say(f"ph = {_fmt(ph)}")
    run.say(f"pc = {_fmt(pc)}")
    run.say(f"range [{_fmt(rng.interval[0])}, {_fmt(rng.interval[1])}] classification {rng.classification}"
            + (f" case {rng.case}" if rng.case else ""))
    run.price_rows([(sc.name, sc.x1, sc.x2, ph, pc, rng.classification, rng.case)])
    run.files["surface_h.csv"] = lambda p: write_surface_csv(sh, p)
    run.files["surface_c.csv"] = lambda p: write_surface_csv(scp, p)


def _sweep(run: _Run, tol: float | None = None) -> None:
    sc = run.sc
    tol = tol if tol is not None else (run.args.tol if run.args.tol is not None else
                                        run.tolerance(0.0, 0.0))
    rep = endowment_sweep(run.model, sc.contract, sc.collateral, sc.sweep, PDESolver(run.grid), tol,
                          workers=min(4, os.cpu_count() or 1))

    def write(path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "ph", "pc"])
            for x, a, b in rep.rows():
                w.writerow([_fmt(x), _fmt(a), _fmt(b)])
    run.files["sweep.csv"] = write
    run.say(f"endowment sweep over {len(sc.sweep)} values, tol={_fmt(tol)}")
    run.check("hedger price monotone in x", rep.hedger_monotone)
    run.check("counterparty price monotone in x", rep.counterparty_monotone)
    run.check("pc(x) <= ph(x) + tol", rep.ordered)
    run.check("ranges nested in the x=0 range", rep.nested)


def _verify(run: _Run) -> None:
    sc, rates = run.sc, run.sc.rates
    rng = np.random.default_rng(run.args.seed)
    n = 10_000
    t = rng.uniform(0.0, rates.horizon, n)
    y, z = rng.normal(0.0, 10.0, n), rng.normal(0.0, 10.0, n)
    s = rng.uniform(1.0, 200.0, n)
    if rates.strong_funding:
        x1, x2 = -rng.exponential(5.0, n), -rng.exponential(5.0, n)
        gap = driver_gap_borrow(t, y, z, x1, x2, rates, s)
        run.check("borrowing driver gap <= 0", bool(np.all(gap <= 1e-12)), f"max {_fmt(np.max(gap))}")
        mag = rng.normal(0.0, 5.0, n)
        first = rng.random(n) < 0.5
        gap = driver_gap_mixed(t, y, z, np.where(first, mag, 0.0), np.where(first, 0.0, mag), rates, s)
        run.check("mixed driver gap <= 0 when x1 x2 = 0", bool(np.all(gap <= 1e-12)),
                  f"max {_fmt(np.max(gap))}")
    else:
        run.say("SKIP driver gap checks: they require r_b <= r_ib")

    tol = run.tolerance(sc.x1, sc.x2)
    run.say(f"tolerance {_fmt(tol)}")
    solver = PDESolver(run.grid)
    sh = solver.surface(run.model, sc.contract, sc.collateral, sc.x1, "hedger")
    scp = solver.surface(run.model, sc.contract, sc.collateral, sc.x2, "counterparty")
    if sc.x1 * sc.x2 >= 0.0:
        gap = float(np.max(scp.price_grid() - sh.price_grid()))
        run.check("pc <= ph + tol at every node", gap <= tol, f"max pc - ph {_fmt(gap)}")
    else:
        run.say("SKIP node ordering: x1 x2 < 0")

    lat = build_lattice(sc.asset, rates, run.args.steps, sc.contract.flow_times)
    sol = solve_bsde(lat, effective_stream(sc.contract, sc.collateral, rates), sc.x1, "hedger")
    rep = cross_check(sh, sol)
    run.check("PDE and lattice agree within 0.5% of price scale", rep.passed,
              f"max diff {_fmt(rep.max_diff)}, scale {_fmt(rep.price_scale)}")

    x = max(sc.x1, 0.0)
    hom = homogeneity_check(run.model, sc.contract, sc.collateral, x, (0.0, 1.0, 3.0), solver)
    run.check("positive homogeneity", hom.max_error <= 10.0 * tol, f"max error {_fmt(hom.max_error)}")
    _sweep(run, tol)

    ph, pc = price_at(sh, 0.0, sc.asset.s0), price_at(scp, 0.0, sc.asset.s0)
    r = bilateral_range(ph, pc, tol)
    run.price_rows([(sc.name, sc.x1, sc.x2, ph, pc, r.classification, r.case)])


def _oracle(run: _Run) -> None:
    sc, rates = run.sc, run.sc.rates
    x1, x2 = sc.x1, sc.x2
    if not x1 > 0.0 > x2:
        x1, x2 = 1.0, -1.0
        run.say("endowments replaced by x1=1, x2=-1 (the oracles need x1 > 0 > x2)")
    o = sc.oracle
    T = rates.horizon
    t0 = float(o.get("t0", 0.5 * T))
    alpha = float(o.get("alpha", 0.5))
    r = o.get("r", 0.5 * (float(rates.r_l(0.0)) + float(rates.r_b(0.0))))
    tol = 1e-9
    rows = []

    spec = CounterexampleSpec(t0, float(r), alpha)
    ce = counterexample_kappa(x1, x2, rates, spec)
    zero_c = CollateralSpec.zero()
    ph_cash = cash_price(ce.contract, zero_c, rates, x1, "hedger")
    pc_cash = cash_price(ce.contract, zero_c, rates, x2, "counterparty")
    cls = bilateral_range(ce.ph0, ce.pc0, 1e-12)
    run.say(f"pay-early/receive-late contract: t0={_fmt(t0)} r={_fmt(r)} alpha={_fmt(alpha)}")
    run.say(f"ph0 = {ce.ph0:.7f}")
    run.say(f"pc0 = {ce.pc0:.7f}")
    run.say(f"classification {cls.classification}" + (f" case {cls.case}" if cls.case else ""))
    run.check("hedger cash route matches closed form", abs(ph_cash - ce.ph0) <= tol,
              f"{_fmt(ph_cash)} vs {_fmt(ce.ph0)}")
    run.check("counterparty cash route matches closed form", abs(pc_cash - ce.pc0) <= tol,
              f"{_fmt(pc_cash)} vs {_fmt(ce.pc0)}")
    run.check("classification profitable", cls.classification == "profitable")
    rows.append((f"{sc.name}:pay-early-receive-late", x1, x2, ce.ph0, ce.pc0, cls.classification, cls.case))

    Bl, Bb = (float(account_value(rates, k, t0)) for k in ("lend", "borrow"))
    a2 = min(alpha, x1 * Bl, -x2 * Bb)
    inc = counterexample_increasing(x1, x2, rates, t0, a2)
    e_h, e_c = replicate_increasing(x1, x2, rates, t0, a2)
    cls2 = bilateral_range(inc.ph0, inc.pc0, 1e-12)
    run.say(f"single-inflow contract: t0={_fmt(t0)} alpha={_fmt(a2)}")
    run.say(f"ph0 = {inc.ph0:.7f}")
    run.say(f"pc0 = {inc.pc0:.7f}")
    run.check("ph0 < pc0", inc.ph0 < inc.pc0)
    run.check("explicit strategies replicate exactly", max(abs(e_h), abs(e_c)) <= 1e-12,
              f"terminal errors {_fmt(e_h)}, {_fmt(e_c)}")
    rows.append((f"{sc.name}:single-inflow", x1, x2, inc.ph0, inc.pc0, cls2.classification, cls2.case))
    run.price_rows(rows)


MODES = {"price": _price, "sweep": _sweep, "verify": _verify, "oracle": _oracle}


def _commit(files: dict, lines: list[str], out: Path) -> None:
    out = out.resolve()
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    try:
        for name, writer in files.items():
            writer(tmp / name)
        (tmp / "report.txt").write_text("\n".join(lines) + "\n")
        if out.exists():
            backup = Path(tempfile.mkdtemp(prefix=f".{out.name}-old-", dir=out.parent))
            os.rename(out, backup / "old")
            os.rename(tmp, out)
            shutil.rmtree(backup)
        else:
            os.rename(tmp, out)
    finally:
        if tmp.exists():
            shutil.rmtree(tmp)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bilateral-pricing",
                                description="Bilateral prices under asymmetric funding and collateral.")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--mode", choices=sorted(MODES), default="price")
    p.add_argument("--out", default="results", help="output directory, replaced atomically")
    p.add_argument("--grid", help="PDE grid as NxM (space nodes x time steps), default 201x200")
    p.add_argument("--steps", type=int, default=200, help="lattice steps for cross checks")
    p.add_argument("--tol", type=float, help="inequality tolerance; estimated from a refinement pair if omitted")
    p.add_argument("--seed", type=int, default=12345, help="seed for sampled checks")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.config)
        problems = validate_model(scenario.rates, scenario.asset, scenario.contract, scenario.collateral)
        if problems:
            print("invalid model: violated " + "; ".join(problems), file=sys.stderr)
            return EXIT_CONFIG
        r = _Run(scenario, args)
        MODES[args.mode](r)
        _commit(r.files, r.lines, Path(args.out))
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        for k, v in getattr(exc, "diagnostics", {}).items():
            print(f"  {k} = {v}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_CHECK if r.failed else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
