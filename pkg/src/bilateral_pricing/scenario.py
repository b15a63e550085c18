"""Loading scenario files (JSON) into model objects."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError
from .expressions import compile_expression
from .market_model import (AssetModel, CollateralSpec, Contract, PiecewiseConstant, RateModel)

DEFAULT_SWEEP = (-10.0, -1.0, -0.1, 0.0, 0.1, 1.0, 10.0)


@dataclass(frozen=True)
class Scenario:
    name: str
    rates: RateModel
    asset: AssetModel
    contract: Contract
    collateral: CollateralSpec
    x1: float
    x2: float
    sweep: tuple[float, ...] = DEFAULT_SWEEP
    oracle: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)


def _need(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigurationError(f"missing field {where}.{key}")
    return obj[key]


def _curve(value, where: str) -> PiecewiseConstant:
    try:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return PiecewiseConstant(float(value))
        return PiecewiseConstant([(float(a), float(b)) for a, b in value])
    except (TypeError, ValueError, DomainError) as exc:
        raise ConfigurationError(f"field {where}: expected a number or a list of [t_start, value] ({exc})") from None


def _expr(value, where: str, variables=("t", "s")):
    try:
        return compile_expression(value, variables)
    except ConfigurationError as exc:
        raise ConfigurationError(f"field {where}: {exc}") from None


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"field {where}: expected a number, got {value!r}")
    return float(value)


def parse_scenario(data: dict, name: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ConfigurationError("the scenario must be a JSON object")
    horizon = _number(data.get("horizon", 1.0), "horizon")
    r = _need(data, "rates", "")
    if not isinstance(r, dict):
        raise ConfigurationError("field rates: expected an object")
    r_l = _curve(_need(r, "r_l", "rates"), "rates.r_l")
    r_b = _curve(_need(r, "r_b", "rates"), "rates.r_b")
    r_ib = _curve(r.get("r_ib", _need(r, "r_b", "rates")), "rates.r_ib")
    r_c = _curve(r.get("r_c", 0.0), "rates.r_c")
    try:
        rates = RateModel(r_l, r_b, r_ib, r_c, horizon, bool(r.get("strict", False)))
    except DomainError as exc:
        raise ConfigurationError(f"field rates: {exc}") from None

    a = _need(data, "asset", "")
    s0 = _number(_need(a, "s0", "asset"), "asset.s0")
    domain = a.get("domain", [0.0, 4.0 * s0])
    if not (isinstance(domain, list) and len(domain) == 2):
        raise ConfigurationError("field asset.domain: expected [s_min, s_max]")
    beta = a.get("beta")
    asset = AssetModel(
        s0=s0,
        sigma=_expr(_need(a, "sigma", "asset"), "asset.sigma"),
        mu=_expr(a.get("mu", 0.0), "asset.mu"),
        kappa=_expr(a.get("kappa", 0.0), "asset.kappa"),
        beta=None if beta is None else _curve(beta, "asset.beta"),
        domain=(_number(domain[0], "asset.domain[0]"), _number(domain[1], "asset.domain[1]")),
    )

    c = data.get("contract", {})
    flows = []
    for i, item in enumerate(c.get("flows", [])):
        if not (isinstance(item, list) and len(item) == 2):
            raise ConfigurationError(f"field contract.flows[{i}]: expected [t, expr]")
        flows.append((_number(item[0], f"contract.flows[{i}][0]"),
                      _expr(item[1], f"contract.flows[{i}][1]", ("s",))))
    contract = Contract(
        p=_number(c.get("p", 0.0), "contract.p"),
        dated_flows=tuple(flows),
        continuous=None if c.get("continuous") is None else _expr(c["continuous"], "contract.continuous"),
        payoff=None if c.get("payoff") is None else _expr(c["payoff"], "contract.payoff", ("s",)),
    )

    col = data.get("collateral", {"expr": 0.0})
    returned = bool(col.get("returned_at_maturity", True))
    collateral = CollateralSpec(_expr(col.get("expr", 0.0), "collateral.expr"),
                                horizon if returned else None)

    e = data.get("endowments", {})
    sweep = tuple(_number(x, "sweep.xs") for x in data.get("sweep", {}).get("xs", DEFAULT_SWEEP))
    return Scenario(
        name=str(data.get("name", name)),
        rates=rates, asset=asset, contract=contract, collateral=collateral,
        x1=_number(e.get("x1", 0.0), "endowments.x1"),
        x2=_number(e.get("x2", 0.0), "endowments.x2"),
        sweep=sweep, oracle=dict(data.get("oracle", {})), raw=data,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_scenario(data, path.stem)


def spot_bounds(scenario: Scenario) -> tuple[float, float]:
    lo, hi = scenario.asset.domain
    if not np.isfinite(hi):
        hi = 4.0 * scenario.asset.s0
    return lo, hi
