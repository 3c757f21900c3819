"""Can station 1's choice of argument be read off station 2's spins?

Station 1 picks u1 in {a, b} with prior (q_a, 1 - q_a); the trial draws its
outcome from p_{u1} (station 1 always reaches the ignition point first, the
setting where its choice weighs most); station 2 records F(u2, outcome).
Station 2 then estimates pr{u1 = a | s2} by relative frequency. Equal to q_a
for both values of s2 means the channel carries no information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from gaugesim.consistency import verify_consistency
from gaugesim.core import Argument, GaugeSystem
from gaugesim.errors import ConfigurationError
from gaugesim.sampler import (
    DEFAULT_SEED,
    STREAM_CHANNEL,
    RandomStream,
    continuous_from_uniforms,
    discrete_from_ints,
    run_chunked,
)
from gaugesim.serialize import dumps

SIGMAS = 4.0
_STRIDE = 4  # draws per trial: input choice, outcome (up to 2), spare


@dataclass(frozen=True)
class ChannelExperiment:
    q_a: float
    u2: Argument
    inputs: tuple[Argument, Argument] = ("a", "b")
    n: int = 10**6
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        q = float(self.q_a)
        if not 0.0 <= q <= 1.0:
            raise ConfigurationError(f"prior q_a={q} outside [0, 1]")
        if self.n < 1:
            raise ConfigurationError("N must be >= 1")
        if len(self.inputs) != 2:
            raise ConfigurationError("the channel input alphabet has exactly two arguments")

    @property
    def q_b(self) -> float:
        return 1.0 - float(self.q_a)


@dataclass
class ChannelReport:
    experiment: ChannelExperiment
    counts: dict[str, int]
    consistent: bool
    posteriors: dict[str, float | None] = field(default_factory=dict)
    sigmas: dict[str, float | None] = field(default_factory=dict)

    def deviation(self, s2: str) -> float | None:
        p = self.posteriors[s2]
        return None if p is None else p - float(self.experiment.q_a)

    def within(self, s2: str, sigmas: float = SIGMAS) -> bool | None:
        d, s = self.deviation(s2), self.sigmas[s2]
        if d is None:
            return None
        return abs(d) <= sigmas * s

    @property
    def no_signaling(self) -> bool:
        """True when every defined posterior lies within 4 sigma of the prior."""
        flags = [self.within(k) for k in ("+1", "-1")]
        return all(f for f in flags if f is not None)

    @property
    def verdict(self) -> str:
        return "no signaling (|delta| < 4 sigma)" if self.no_signaling else "SIGNALING DETECTED (|delta| > 4 sigma)"

    def to_dict(self) -> dict[str, Any]:
        exp = self.experiment
        return {
            "priors": {"q_a": float(exp.q_a), "q_b": exp.q_b},
            "inputs": list(exp.inputs),
            "u2": exp.u2,
            "n": exp.n,
            "seed": exp.seed,
            "counts": self.counts,
            "posteriors": self.posteriors,
            "sigmas": self.sigmas,
            "deviations": {k: self.deviation(k) for k in ("+1", "-1")},
            "within_4_sigma": {k: self.within(k) for k in ("+1", "-1")},
            "consistent": self.consistent,
            "no_signaling": self.no_signaling,
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return dumps(self)


def run_channel(sys: GaugeSystem, exp: ChannelExperiment, threads: int = 1) -> ChannelReport:
    ua, ub = (sys.canonical_argument(u) for u in exp.inputs)
    u2 = sys.canonical_argument(exp.u2)
    consistent = verify_consistency(sys, [ua, ub, u2] if u2 not in (ua, ub) else [ua, ub]).passed
    dists = (sys.distribution(ua), sys.distribution(ub))
    stream = RandomStream(exp.seed, STREAM_CHANNEL)
    q_a = float(exp.q_a)
    discrete = sys.kind == "discrete"

    def work(lo, hi):
        raw = stream.ints53(_STRIDE * lo, _STRIDE * (hi - lo)).reshape(hi - lo, _STRIDE)
        uni = raw.astype(np.float64) * 2.0**-53
        pick_a = uni[:, 0] < q_a
        if discrete:
            lam = np.where(pick_a, discrete_from_ints(dists[0], raw[:, 1]), discrete_from_ints(dists[1], raw[:, 1]))
        else:
            lam = np.where(
                pick_a,
                continuous_from_uniforms(dists[0], uni[:, 1], uni[:, 2]),
                continuous_from_uniforms(dists[1], uni[:, 1], uni[:, 2]),
            )
        s2 = sys.observable(u2, lam).astype(np.int16)
        if sys.anticorrelated:
            s2 = -s2
        plus = s2 == 1
        return np.array(
            [
                np.count_nonzero(pick_a & plus),
                np.count_nonzero(pick_a & ~plus),
                np.count_nonzero(~pick_a & plus),
                np.count_nonzero(~pick_a & ~plus),
            ],
            dtype=np.int64,
        )

    totals = np.sum(run_chunked(work, exp.n, threads), axis=0)
    counts = {"a,+1": int(totals[0]), "a,-1": int(totals[1]), "b,+1": int(totals[2]), "b,-1": int(totals[3])}
    report = ChannelReport(exp, counts, consistent)
    for key, (na, nb) in {"+1": (totals[0], totals[2]), "-1": (totals[1], totals[3])}.items():
        total = int(na + nb)
        if total == 0:
            report.posteriors[key] = None
            report.sigmas[key] = None
        else:
            report.posteriors[key] = int(na) / total
            report.sigmas[key] = math.sqrt(q_a * (1.0 - q_a) / total)
    counts["s2=+1"] = int(totals[0] + totals[2])
    counts["s2=-1"] = int(totals[1] + totals[3])
    return report
