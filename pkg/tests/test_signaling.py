from __future__ import annotations

import json
import math

import pytest

from gaugesim.errors import ConfigurationError
from gaugesim.signaling import ChannelExperiment, run_channel

N = 10**6


def test_table1_no_signaling(t1):
    rep = run_channel(t1, ChannelExperiment(0.5, "c", ("a", "b"), N, seed=1))
    assert rep.consistent
    for key in ("+1", "-1"):
        assert abs(rep.posteriors[key] - 0.5) <= 4 * math.sqrt(0.25 / rep.counts[f"s2={key}"])
    assert rep.no_signaling
    assert rep.verdict == "no signaling (|delta| < 4 sigma)"


def test_circle_no_signaling(circle):
    rep = run_channel(circle, ChannelExperiment(0.3, math.pi / 5, (0.0, math.pi / 3), N, seed=2))
    assert rep.consistent and rep.no_signaling
    for key in ("+1", "-1"):
        assert rep.within(key)


@pytest.mark.parametrize("u2", ["a", "b", "c"])
@pytest.mark.parametrize("qa", [0.2, 0.7])
def test_no_signaling_grid(t1, u2, qa):
    rep = run_channel(t1, ChannelExperiment(qa, u2, ("a", "b"), 200_000, seed=3))
    assert rep.no_signaling


def test_degenerate_prior(t1):
    rep = run_channel(t1, ChannelExperiment(1.0, "c", ("a", "b"), 10_000, seed=4))
    assert rep.posteriors == {"+1": 1.0, "-1": 1.0}
    assert rep.no_signaling


def test_zero_count_is_undefined():
    from fractions import Fraction as F
    from gaugesim.core import DiscreteGaugeSystem

    # s2 is always +1 under u2 = x, so the s2 = -1 event never happens
    sys = DiscreteGaugeSystem(
        outcomes=("l1", "l2"),
        signs={"a": (1, -1), "b": (-1, 1), "x": (1, 1)},
        masses={"a": (F(1, 2), F(1, 2)), "b": (F(1, 2), F(1, 2)), "x": (F(1, 2), F(1, 2))},
    )
    rep = run_channel(sys, ChannelExperiment(0.5, "x", ("a", "b"), 1000, seed=5))
    assert rep.posteriors["-1"] is None and rep.within("-1") is None


def test_negative_control_signals(t1_bad):
    rep = run_channel(t1_bad, ChannelExperiment(0.5, "a", ("a", "b"), N, seed=6))
    assert not rep.consistent
    # Bayes oracle: pr(s_a=+1 | p_a) = 1/2, pr(s_a=+1 | perturbed p_b) = 1/4 -> posterior 2/3
    assert rep.posteriors["+1"] == pytest.approx(2 / 3, abs=4 * rep.sigmas["+1"])
    assert not rep.no_signaling
    assert abs(rep.deviation("+1")) > 4 * rep.sigmas["+1"]


def test_bad_prior():
    with pytest.raises(ConfigurationError):
        ChannelExperiment(1.5, "c")


def test_report_json(t1):
    rep = run_channel(t1, ChannelExperiment(0.5, "c", n=1000, seed=7))
    doc = json.loads(rep.to_json())
    assert set(doc) >= {"priors", "posteriors", "counts", "sigmas", "verdict"}


def test_thread_count_does_not_change_counts(t1):
    exp = ChannelExperiment(0.4, "c", n=50_001, seed=8)
    assert run_channel(t1, exp, threads=1).to_json() == run_channel(t1, exp, threads=3).to_json()
