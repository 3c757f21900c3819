from __future__ import annotations

import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gaugesim.bell import (
    BellEvaluation,
    ObservableArray,
    bell_check,
    correlation_sigma,
    empirical_bell,
    empirical_correlation,
    hamming_distance,
    normalized_distance,
    read_arrays_csv,
    sample_pair_arrays,
    shared_outcome_triple,
    write_arrays_csv,
)
from gaugesim.errors import ConfigurationError
from gaugesim.sampler import STREAM_TRIPLE, RandomStream, sample_outcomes

bits = st.integers(1, 64).flatmap(lambda n: st.tuples(*[arrays(np.uint8, n, elements=st.integers(0, 1))] * 3))
spins = st.integers(1, 200).flatmap(
    lambda n: st.tuples(*[arrays(np.int8, n, elements=st.sampled_from([-1, 1]))] * 3)
)


def test_hamming_examples():
    assert hamming_distance([0, 1, 1, 0], [0, 1, 0, 1]) == 2
    x = np.array([1, 0, 1])
    assert hamming_distance(x, x) == 0
    with pytest.raises(ValueError):
        hamming_distance([0, 1], [0])


@given(bits)
def test_hamming_metric_axioms(xyz):
    x, y, z = xyz
    assert hamming_distance(x, y) == hamming_distance(y, x)
    assert (hamming_distance(x, y) == 0) == bool(np.array_equal(x, y))
    assert hamming_distance(x, y) <= hamming_distance(x, z) + hamming_distance(z, y)


def test_distance_examples():
    s = ObservableArray("a", [1, 1, -1, -1])
    assert normalized_distance(s, s) == 0
    assert normalized_distance(s, -s) == 1 and empirical_correlation(s, -s) == -1
    t = ObservableArray("b", [1, -1, -1, 1])
    assert normalized_distance(s, t) == F(1, 2) and empirical_correlation(s, t) == 0
    assert empirical_correlation(s, s) == 1


@given(spins)
def test_distance_correlation_identity(arrs):
    s1, s2 = ObservableArray("a", arrs[0]), ObservableArray("b", arrs[1])
    assert normalized_distance(s1, s2) == (1 - empirical_correlation(s1, s2)) / 2


@given(spins)
def test_finite_n_bell_property(arrs):
    ev = empirical_bell(*(ObservableArray(k, v) for k, v in zip("abc", arrs)))
    assert not ev.violated
    assert ev.lhs <= ev.rhs


def test_observable_array_validation():
    with pytest.raises(ValueError):
        ObservableArray("a", [1, 0, -1])
    with pytest.raises(ValueError):
        ObservableArray("a", [])
    arr = ObservableArray("a", [1, -1])
    assert arr.values.dtype == np.int8 and not arr.values.flags.writeable
    with pytest.raises(ValueError):
        empirical_correlation(arr, ObservableArray("b", [1]))


def test_bell_check_examples():
    ev = bell_check(F(2, 3), F(0), F(2, 3))
    assert ev.violated and ev.lhs == F(2, 3) and ev.rhs == F(1, 3)
    assert ev.describe() == "VIOLATED (2/3 > 1/3)"
    r = math.sqrt(0.5)
    ev = bell_check(r, math.cos(math.pi / 2), r)
    assert ev.violated and ev.lhs == pytest.approx(0.7071, abs=1e-4) and ev.rhs == pytest.approx(0.2929, abs=1e-4)
    ev = bell_check(1, 1, 1)
    assert not ev.violated and ev.lhs == 0 and ev.rhs == 0
    with pytest.raises(ValueError):
        bell_check(1.5, 0, 0)


@given(st.fractions(-1, 1), st.fractions(-1, 1), st.fractions(-1, 1))
def test_violated_iff_lhs_gt_rhs(a, b, c):
    ev = bell_check(a, b, c)
    assert ev.violated == (ev.lhs > ev.rhs)
    assert BellEvaluation.from_dict(ev.to_dict()) == ev


def test_shared_outcome_triple_examples(kolmo):
    sa, sb, sc = shared_outcome_triple(kolmo, (0.0, 1.0, 2.0), 1, seed=3)
    assert len(sa) == 1
    sa, sb, sc = shared_outcome_triple(kolmo, (0.4, 0.4, 0.4), 500, seed=1)
    assert np.array_equal(sa.values, sb.values) and np.array_equal(sb.values, sc.values)
    ev = empirical_bell(*shared_outcome_triple(kolmo, (0, math.pi / 4, math.pi / 2), 10**5, seed=7))
    assert not ev.violated


def test_shared_outcome_single_lambda_mapping(kolmo):
    args = (0.0, math.pi / 2, 2.0)
    triple = shared_outcome_triple(kolmo, args, 1, seed=11)
    lam = sample_outcomes(kolmo.distribution(0.0), RandomStream(11, STREAM_TRIPLE), 1)
    for arr, u in zip(triple, args):
        assert arr.values[0] == (1 if math.cos(lam[0] - u) >= 0 else -1)


def test_shared_outcome_requires_decoupled(circle):
    with pytest.raises(ConfigurationError):
        shared_outcome_triple(circle, (0, 1, 2), 10, seed=1)


def test_sampled_correlations(t1, circle):
    n = 10**6
    s1, s2 = sample_pair_arrays(t1, "a", "b", n, seed=5)
    assert abs(float(empirical_correlation(s1, s2)) - 2 / 3) <= 4 * correlation_sigma(2 / 3, n)
    s1, s2 = sample_pair_arrays(circle, 0.0, math.pi / 3, n, seed=5)
    assert abs(float(empirical_correlation(s1, s2)) - 0.5) <= 4 / math.sqrt(n)


def test_csv_round_trip(tmp_path, t1):
    s1, s2 = sample_pair_arrays(t1, "a", "c", 50, seed=2)
    path = tmp_path / "arrays.csv"
    write_arrays_csv(path, [s1, s2])
    text = path.read_bytes()
    assert text.startswith(b"a,c\n") and b"\r" not in text
    back = read_arrays_csv(path)
    assert [b.argument for b in back] == ["a", "c"]
    assert np.array_equal(back[0].values, s1.values) and np.array_equal(back[1].values, s2.values)
