import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bilateral_pricing.errors import ConfigurationError
from bilateral_pricing.expressions import compile_expression
from bilateral_pricing.scenario import load_scenario, parse_scenario


def test_payoff_expression():
    f = compile_expression("max(s - 100, 0)", ("s",))
    np.testing.assert_array_equal(f(np.array([90.0, 100.0, 130.0])), [0.0, 0.0, 30.0])


def test_time_and_functions():
    f = compile_expression("exp(-0.05 * t) * pow(s, 2) / 4 + min(s, 1) - -1")
    np.testing.assert_allclose(f(1.0, np.array([2.0])), np.exp(-0.05) + 1.0 + 1.0)


def test_constant_broadcasts():
    f = compile_expression(2.5)
    np.testing.assert_array_equal(f(0.0, np.zeros(3)), [2.5, 2.5, 2.5])
    g = compile_expression("3", ("t", "s"))
    assert g(0.0, np.zeros(4)).shape == (4,)


@pytest.mark.parametrize("src", [
    "__import__('os')", "s.real", "s[0]", "lambda: 1", "abs(s)", "x + 1", "s if s else 1",
    "'a'", "s == 1", "max(s)", "1 +",
])
def test_rejects_unsafe_or_unknown(src):
    with pytest.raises(ConfigurationError):
        f = compile_expression(src, ("t", "s"))
        f(0.0, np.ones(2))


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_matches_python_arithmetic(a, b):
    f = compile_expression("max(s, t) - 2 * (s - t) / 4", ("t", "s"))
    np.testing.assert_allclose(f(a, np.array([b])), max(a, b) - 2 * (b - a) / 4, rtol=1e-12, atol=1e-12)


BASE = {
    "rates": {"r_l": [[0, 0.01], [0.5, 0.02]], "r_b": 0.05, "r_ib": 0.06, "r_c": 0.01},
    "asset": {"s0": 100, "sigma": "0.2 * s", "domain": [0, 400]},
    "contract": {"p": 1, "flows": [[0.5, "0.1 * s"]], "payoff": "max(s - 100, 0)"},
    "collateral": {"expr": "0.5 * s"},
    "endowments": {"x1": 2, "x2": -1},
}


def test_parse_scenario():
    sc = parse_scenario(BASE, "base")
    assert sc.name == "base" and sc.x1 == 2.0 and sc.x2 == -1.0
    assert sc.rates.r_l(0.75) == 0.02
    np.testing.assert_allclose(sc.contract.terminal(np.array([120.0])), [20.0])
    np.testing.assert_allclose(sc.contract.dated_flows[0][1](np.array([50.0])), [5.0])
    assert sc.collateral(1.0, np.array([50.0]))[0] == 0.0
    assert sc.collateral(0.5, np.array([50.0]))[0] == 25.0


@pytest.mark.parametrize("patch, field", [
    ({"rates": {"r_b": 0.05}}, "rates.r_l"),
    ({"asset": {"s0": 100, "sigma": "0.2 * q"}}, "asset.sigma"),
    ({"contract": {"payoff": "max(t, 1)"}}, "contract.payoff"),
    ({"contract": {"flows": [[0.5]]}}, "contract.flows[0]"),
    ({"endowments": {"x1": "one"}}, "endowments.x1"),
])
def test_field_diagnostics(patch, field):
    with pytest.raises(ConfigurationError, match=field.replace("[", r"\[").replace("]", r"\]")):
        parse_scenario({**BASE, **patch})


def test_json_syntax_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "rates": {\n    "r_l": 0.01,,\n  }\n}\n')
    with pytest.raises(ConfigurationError, match=r"bad.json:3:"):
        load_scenario(p)


def test_load_roundtrip(tmp_path):
    p = tmp_path / "ok.json"
    p.write_text(json.dumps(BASE))
    assert load_scenario(p).name == "ok"
