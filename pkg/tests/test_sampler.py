from __future__ import annotations

import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy import integrate

from gaugesim.core import DiscreteDistribution
from gaugesim.sampler import (
    DEFAULT_SEED,
    RandomStream,
    circle_inverse_cdf,
    discrete_from_ints,
    discrete_thresholds,
    run_chunked,
    sample_circle,
    sample_discrete,
    sample_outcomes,
    seed_from_env,
)

TWO_PI = 2 * math.pi
N = 10**6

# Philox4x64-10 known-answer vector (key 0, counter 0)
KAT = [0x16554D9ECA36314C, 0xDB20FE9D672D0FDC, 0xD7E772CEE186176B, 0x7E68B68AEC7BA23B]


def test_philox_known_answer():
    assert [int(x) for x in RandomStream(0, 0).raw(0, 4)] == KAT


def test_counter_addressing():
    rs = RandomStream(123, 4)
    whole = rs.raw(0, 40)
    assert np.array_equal(rs.raw(3, 5), whole[3:8])
    assert np.array_equal(rs.raw(17, 23), whole[17:])
    assert np.array_equal(rs.substream(2).raw(0, 4), RandomStream(123, 6).raw(0, 4))


def test_uniform_range():
    u = RandomStream(1, 1).uniforms(0, 10_000)
    assert u.min() >= 0 and u.max() < 1


def test_thresholds_exact():
    weights = [F(1, 3), F(1, 3), F(1, 3)]
    th = discrete_thresholds(weights)
    assert [int(t) for t in th] == [math.ceil(F(k, 3) * 2**53) for k in (1, 2, 3)]
    dist = DiscreteDistribution("a", tuple(weights))
    edge = int(th[0])
    r = np.array([0, edge - 1, edge, 2**53 - 1], dtype=np.int64)
    assert list(discrete_from_ints(dist, r)) == [0, 0, 1, 2]


def test_degenerate_weights():
    dist = DiscreteDistribution("a", (F(1), *([F(0)] * 5)))
    assert np.all(sample_discrete(dist, RandomStream(5, 1), 10_000) == 0)


@pytest.mark.parametrize("col", ["a", "b"])
def test_table1_frequencies(t1, col):
    dist = t1.distribution(col)
    lam = sample_discrete(dist, RandomStream(DEFAULT_SEED, 1), N)
    counts = np.bincount(lam, minlength=6)
    for i, p in enumerate(dist.weights):
        p = float(p)
        assert abs(counts[i] / N - p) <= 4 * math.sqrt(p * (1 - p) / N)


def test_inverse_cdf_mode():
    assert circle_inverse_cdf(0.9, np.array([0.5]), np.array([0.75]))[0] == pytest.approx(0.9)


def _bin_mass(u, lo, hi):
    return integrate.quad(lambda x: abs(math.cos(x - u)) / 4, lo, hi,
                          points=[p for p in ((u + math.pi / 2) % TWO_PI, (u + 3 * math.pi / 2) % TWO_PI)
                                  if lo < p < hi])[0]


@pytest.mark.parametrize("u", [0.0, 1.1])
def test_circle_histogram(u):
    lam = sample_circle(u, RandomStream(DEFAULT_SEED, 6), N)
    assert lam.min() >= 0 and lam.max() < TWO_PI
    edges = np.linspace(0, TWO_PI, 65)
    counts, _ = np.histogram(lam, edges)
    for k in range(64):
        p = _bin_mass(u, edges[k], edges[k + 1])
        sigma = math.sqrt(max(p * (1 - p), 1.0 / N) / N)
        assert abs(counts[k] / N - p) <= 4 * sigma, k
    spins = np.where(np.cos(lam - u) >= 0, 1, -1)
    assert abs(spins.mean()) <= 4 / math.sqrt(N)


def test_stream_independence():
    a = RandomStream(DEFAULT_SEED, 1).uniforms(0, N) - 0.5
    b = RandomStream(DEFAULT_SEED, 2).uniforms(0, N) - 0.5
    rho = float(np.corrcoef(a, b)[0, 1])
    assert abs(rho) < 4 / math.sqrt(N)


def test_threads_do_not_change_samples(circle):
    dist = circle.distribution(0.3)
    one = sample_outcomes(dist, RandomStream(2, 1), 100_003, threads=1)
    four = sample_outcomes(dist, RandomStream(2, 1), 100_003, threads=4)
    assert np.array_equal(one, four)


def test_run_chunked_order():
    parts = run_chunked(lambda lo, hi: list(range(lo, hi)), 10, threads=3)
    assert sum(parts, []) == list(range(10))


def test_seed_env(monkeypatch):
    monkeypatch.setenv("GAUGESIM_SEED", "77")
    assert seed_from_env() == 77
    monkeypatch.delenv("GAUGESIM_SEED")
    assert seed_from_env() == DEFAULT_SEED
