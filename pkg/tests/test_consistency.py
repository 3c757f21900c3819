from __future__ import annotations

import json
import math
from fractions import Fraction as F

import numpy as np
import pytest

from conftest import MASSES, SIGNS
from gaugesim.consistency import (
    correlation,
    monte_carlo_expectations,
    parametric_expectation,
    verify_consistency,
)
from gaugesim.errors import ConfigurationError, NumericalError
from gaugesim.quadrature import integrate_circle

TWO_PI = 2 * math.pi


def hand_expectation(dist_arg, observables, masses=MASSES):
    total = F(0)
    for i, p in enumerate(masses[dist_arg]):
        prod = 1
        for u in observables:
            prod *= SIGNS[u][i]
        total += prod * p
    return total


def test_parametric_expectation_examples(t1, circle):
    assert parametric_expectation(t1, "a", ("a",)) == 0
    assert parametric_expectation(circle, 0.2, (0.2, 0.2 + math.pi / 4)) == pytest.approx(math.cos(math.pi / 4), abs=1e-9)
    assert parametric_expectation(circle, 1.0, (0.0,)) == pytest.approx(0, abs=1e-9)


@pytest.mark.parametrize("d", "abc")
@pytest.mark.parametrize("obs", [("a",), ("b",), ("c",), ("a", "b"), ("a", "c"), ("b", "c")])
def test_discrete_expectations_match_hand_sums(t1, d, obs):
    assert parametric_expectation(t1, d, obs) == hand_expectation(d, obs)


def test_table1_consistent_exactly(t1):
    rep = verify_consistency(t1, ["a", "b", "c"])
    assert rep.passed and rep.method == "exact"
    assert len(rep.pairs) == 6
    assert rep.max_deltas() == (0, 0)
    assert all(isinstance(p.delta_mean, F) for p in rep.pairs)
    assert rep.common_mean("a") == 0


def test_perturbed_table1_fails(t1_bad):
    rep = verify_consistency(t1_bad, ["a", "b", "c"])
    assert not rep.passed
    bad = dict(MASSES)
    bad["b"] = (MASSES["b"][1], MASSES["b"][0], *MASSES["b"][2:])
    pair = next(p for p in rep.pairs if (p.a, p.b) == ("a", "b"))
    assert pair.mean_under_b == hand_expectation("b", ("a",), bad) == F(-1, 2)
    assert pair.product_under_b == hand_expectation("b", ("a", "b"), bad) == F(1, 6)
    assert rep.common_mean("a") is None


def test_circle_random_pairs(circle):
    rng = np.random.default_rng(0)
    for a, b in rng.uniform(0, TWO_PI, size=(8, 2)):
        rep = verify_consistency(circle, [a, b], tol=1e-9)
        assert rep.passed and rep.method == "quadrature"


def test_quadrature_order_doubling(circle):
    grid = np.linspace(0, TWO_PI, 9, endpoint=False)
    for a in grid:
        for b in grid[::2]:
            for obs in ((a,), (a, b)):
                lo = parametric_expectation(circle, b, obs, order=32)
                hi = parametric_expectation(circle, b, obs, order=64)
                assert abs(lo - hi) < 1e-12


def test_quadrature_detects_undeclared_kink():
    # |cos| with its kinks hidden from the integrator is not resolved at order 32
    with pytest.raises(NumericalError):
        integrate_circle(lambda x: np.abs(np.cos(x)), breakpoints=())


@pytest.mark.parametrize("sysname,args", [("t1", ["a", "b", "c"]), ("circle", [0.0, math.pi / 4, math.pi / 2])])
def test_monte_carlo_agrees_with_exact(request, sysname, args):
    sys = request.getfixturevalue(sysname)
    n = 10**6
    products = [(args[0],), (args[0], args[1]), (args[1], args[2])]
    for k, d in enumerate(args):
        est = monte_carlo_expectations(sys, d, products, n, seed=99, stream=k)
        for obs, (mean, _se) in zip(products, est):
            exact = float(parametric_expectation(sys, d, obs))
            assert abs(mean - exact) <= 4 / math.sqrt(n)


def test_monte_carlo_consistency_method(t1, t1_bad):
    assert verify_consistency(t1, ["a", "b", "c"], method="monte-carlo", n=200_000).passed
    assert not verify_consistency(t1_bad, ["a", "b", "c"], method="monte-carlo", n=200_000).passed


def test_method_mismatch(t1, circle):
    with pytest.raises(ConfigurationError):
        verify_consistency(circle, [0.0, 1.0], method="exact")
    with pytest.raises(ConfigurationError):
        verify_consistency(t1, ["a", "b"], method="quadrature")


def test_report_json(t1):
    doc = json.loads(verify_consistency(t1, ["a", "b"]).to_json())
    assert doc["pass"] is True and doc["method"] == "exact"
    assert doc["pairs"][0]["E_a[s_a s_b]"] == "2/3"


def test_anticorrelated_flag_negates_correlation():
    from gaugesim.models import table1_system

    assert correlation(table1_system(anticorrelated=True), "a", "b") == F(-2, 3)
