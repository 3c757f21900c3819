from __future__ import annotations

import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy import integrate

from conftest import MASSES, SIGNS, hand_correlation
from gaugesim.consistency import parametric_expectation
from gaugesim.models import (
    MODELS,
    exact_correlation_circle,
    exact_correlation_discrete,
    get_model,
    kolmogorov_correlation,
    parametric_mean_circle,
)
from gaugesim.errors import ConfigurationError

TWO_PI = 2 * math.pi


def test_table1_transcription(t1):
    idx = np.arange(6)
    for u in "abc":
        assert tuple(t1.distribution(u).weights) == MASSES[u]
        assert tuple(int(s) for s in t1.observable(u, idx)) == SIGNS[u]
        assert sum(MASSES[u]) == 1


@pytest.mark.parametrize("m", [F(0), F(1)])
def test_table1_correlations(t1, m):
    assert exact_correlation_discrete(t1, "a", "b", m) == F(2, 3)
    assert exact_correlation_discrete(t1, "a", "c", m) == 0
    assert exact_correlation_discrete(t1, "b", "c", m) == F(2, 3)


@pytest.mark.parametrize("u1", "abc")
@pytest.mark.parametrize("u2", "abc")
@pytest.mark.parametrize("m", [F(0), F(1, 3), F(1)])
def test_table1_against_hand_oracle(t1, u1, u2, m):
    assert exact_correlation_discrete(t1, u1, u2, m) == hand_correlation(u1, u2, m)


def test_self_correlation_is_one(t1):
    for u in "abc":
        assert exact_correlation_discrete(t1, u, u, F(2, 7)) == 1


def _scipy_product(u_dist, a, b):
    # scipy oracle, splitting at the kinks of both observables and the density
    pts = sorted({(x + k * math.pi / 2) % TWO_PI for x in (a, b, u_dist) for k in (1, 3)})

    def f(lam):
        return abs(math.cos(lam - u_dist)) / 4 * (1 if math.cos(lam - a) >= 0 else -1) * (
            1 if math.cos(lam - b) >= 0 else -1)

    edges = [0.0, *pts, TWO_PI]
    return sum(integrate.quad(f, lo, hi, epsabs=1e-13)[0] for lo, hi in zip(edges, edges[1:]) if hi > lo)


@pytest.mark.parametrize("a,b", [(0, 0), (0, math.pi / 4), (0, math.pi / 2), (1.0, 2.5), (5.9, 0.3)])
def test_circle_closed_form(circle, a, b):
    assert exact_correlation_circle(a, b) == pytest.approx(math.cos(a - b), abs=1e-15)
    oracle = _scipy_product(a, a, b)
    assert oracle == pytest.approx(math.cos(a - b), abs=1e-9)
    assert parametric_expectation(circle, a, (a, b)) == pytest.approx(oracle, abs=1e-9)
    assert parametric_expectation(circle, b, (a, b)) == pytest.approx(oracle, abs=1e-9)


def test_circle_examples():
    assert exact_correlation_circle(0, 0) == 1
    assert exact_correlation_circle(0, math.pi / 4) == pytest.approx(0.70711, abs=1e-5)
    assert exact_correlation_circle(0, math.pi / 2) == pytest.approx(0, abs=1e-15)


@pytest.mark.parametrize("a,b", [(0.3, 0.3), (0.3, 0.3 + math.pi / 3), (0.3, 0.3 + math.pi)])
def test_parametric_mean_circle(circle, a, b):
    assert parametric_mean_circle(a, b) == 0
    assert parametric_expectation(circle, b, (a,)) == pytest.approx(0, abs=1e-9)


def test_circle_twenty_point_grid(circle):
    grid = np.linspace(0, TWO_PI, 20, endpoint=False)
    for a, b in zip(grid, np.roll(grid, 7)):
        assert parametric_expectation(circle, a, (a, b)) == pytest.approx(math.cos(a - b), abs=1e-9)
        assert parametric_expectation(circle, b, (a, b)) == pytest.approx(math.cos(a - b), abs=1e-9)


@pytest.mark.parametrize("u", [0.0, 0.7, math.pi, 5.5])
def test_circle_density_normalized_and_antiperiodic(circle, u):
    dist = circle.distribution(u)
    assert dist.total_mass() == pytest.approx(1.0, abs=1e-10)
    lam = np.linspace(0, math.pi, 97, endpoint=False) + 0.01
    f = circle.observable(u, lam)
    g = circle.observable(u, (lam + math.pi) % TWO_PI)
    assert np.array_equal(f, -g)
    # s_a(lam) p_b(lam) is antiperiodic with period pi
    pb = circle.distribution(u + 1.1)
    assert np.allclose(f * pb.density(lam), -(g * pb.density((lam + math.pi) % TWO_PI)))


def test_kolmogorov_is_decoupled(kolmo):
    lam = np.linspace(0, TWO_PI, 33, endpoint=False)
    assert kolmo.is_decoupled
    assert np.array_equal(kolmo.distribution(0.0).density(lam), kolmo.distribution(2.0).density(lam))
    for a, b in [(0, math.pi / 4), (0, math.pi / 2), (1.0, 1.0)]:
        assert parametric_expectation(kolmo, a, (a, b)) == pytest.approx(kolmogorov_correlation(a, b), abs=1e-9)
    assert kolmogorov_correlation(0, math.pi / 4) == pytest.approx(0.5)


def test_registry():
    assert set(MODELS) == {"table1", "circle", "kolmogorov-uniform"}
    for name in MODELS:
        assert get_model(name).name == name
    with pytest.raises(ConfigurationError):
        get_model("nope")
