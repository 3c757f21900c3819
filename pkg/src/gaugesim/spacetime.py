"""Finite-velocity "ignition point" protocol.

Each pair runs through a closed-form timeline (pairs never interact, so no
global event queue is needed):

    t1        source excitation (recorded, no logic)
    t2        pair emission (recorded, no logic)
    t3, t4    polarizers open with arguments u1, u2
    t5        photons arrive; both arguments start towards P
    tau       = t5 + min(tau1, tau2): first argument reaches P, trial runs
              with p_{u_winner}; the late argument is discarded
    t6, t7    = tau + tau1, tau + tau2: the outcome is back at R1, R2
    t8, t9    optional shutter times; a station detects iff
              t_open <= t5 and t_return <= t_shut

tau1 + tau2 = T is fixed; tau1 follows the ignition law.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from gaugesim.bell import bell_check
from gaugesim.consistency import correlation
from gaugesim.core import Argument, GaugeSystem
from gaugesim.errors import ConfigurationError
from gaugesim.models import get_model
from gaugesim.sampler import (
    DEFAULT_SEED,
    STREAM_PROTOCOL,
    RandomStream,
    continuous_from_uniforms,
    discrete_from_ints,
    run_chunked,
)
from gaugesim.serialize import dumps

SIGMAS = 4.0
_STRIDE = 8  # draws per pair: tau1, tie coin, u1, u2, outcome v, outcome w, spare, spare
IGNITION_LAWS = ("uniform", "triangular", "fixed")


@dataclass(frozen=True)
class SpacetimeConfig:
    T: float = 1.0
    ignition: str = "uniform"
    ignition_value: float | None = None  # tau1 for the fixed law
    t1: float = 0.0
    t2: float = 0.25
    open_times: tuple[float, float] = (0.5, 0.5)
    arrival_time: float = 1.0
    shutter_times: tuple[float | None, float | None] | None = None
    argument_policy: str = "fixed"
    arguments: tuple = (0.0, math.pi / 3)
    model: str = "circle"
    n: int = 10_000
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        T = float(self.T)
        if not (math.isfinite(T) and T >= 0.0):
            raise ConfigurationError(f"total delay T must be finite and >= 0, got {self.T}")
        if self.ignition not in IGNITION_LAWS:
            raise ConfigurationError(f"unknown ignition law {self.ignition!r}; choose from {IGNITION_LAWS}")
        if self.ignition == "fixed":
            if self.ignition_value is None or not 0.0 <= float(self.ignition_value) <= T:
                raise ConfigurationError(f"fixed ignition needs 0 <= tau1 <= T, got {self.ignition_value}")
        t3, t4 = self.open_times
        t5 = self.arrival_time
        if not (t5 >= t3 and t5 >= t4):
            raise ConfigurationError(f"arrival t5={t5} must not precede openings t3={t3}, t4={t4}")
        if self.shutter_times is not None:
            t8, t9 = self.shutter_times
            if t8 is not None and not t8 > t3:
                raise ConfigurationError(f"shutter t8={t8} must be later than t3={t3}")
            if t9 is not None and not t9 > t4:
                raise ConfigurationError(f"shutter t9={t9} must be later than t4={t4}")
        if self.argument_policy not in ("fixed", "uniform"):
            raise ConfigurationError(f"unknown argument policy {self.argument_policy!r}")
        if self.argument_policy == "fixed" and len(self.arguments) != 2:
            raise ConfigurationError("fixed policy needs exactly two arguments (u1, u2)")
        if self.argument_policy == "uniform" and len(self.arguments) < 2:
            raise ConfigurationError("uniform policy needs at least two candidate arguments")
        if int(self.n) < 1:
            raise ConfigurationError("N must be >= 1")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "arguments", tuple(self.arguments))

    def system(self) -> GaugeSystem:
        return get_model(self.model)

    def ignition_tau1(self, u: np.ndarray) -> np.ndarray:
        T = self.T
        if self.ignition == "uniform":
            return T * u
        if self.ignition == "triangular":
            return np.where(u < 0.5, T * np.sqrt(u / 2.0), T * (1.0 - np.sqrt((1.0 - u) / 2.0)))
        return np.full(u.shape, float(self.ignition_value))


@dataclass(frozen=True)
class TrialTimeline:
    pair: int
    u1: Argument
    u2: Argument
    tau1: float
    tau2: float
    winner: int
    tau: float
    outcome: Any
    t6: float
    t7: float
    detected1: bool
    detected2: bool
    s1: int | None
    s2: int | None


@dataclass(eq=False)
class Timelines:
    """Struct-of-arrays view of all pairs of one run."""

    config: SpacetimeConfig
    candidates: tuple
    u1_index: np.ndarray
    u2_index: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    winner: np.ndarray
    tau: np.ndarray
    outcome: np.ndarray
    t6: np.ndarray
    t7: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    detected1: np.ndarray = field(default=None)
    detected2: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.detected1 is None:
            cfg = self.config
            t8, t9 = cfg.shutter_times if cfg.shutter_times is not None else (None, None)
            self.detected1, self.detected2 = detection(self.t6, self.t7, cfg, t8, t9)

    def __len__(self) -> int:
        return int(self.tau1.size)

    def row(self, i: int) -> TrialTimeline:
        d1, d2 = bool(self.detected1[i]), bool(self.detected2[i])
        lam = self.outcome[i]
        return TrialTimeline(
            pair=i,
            u1=self.candidates[self.u1_index[i]],
            u2=self.candidates[self.u2_index[i]],
            tau1=float(self.tau1[i]),
            tau2=float(self.tau2[i]),
            winner=int(self.winner[i]),
            tau=float(self.tau[i]),
            outcome=int(lam) if np.issubdtype(self.outcome.dtype, np.integer) else float(lam),
            t6=float(self.t6[i]),
            t7=float(self.t7[i]),
            detected1=d1,
            detected2=d2,
            s1=int(self.s1[i]) if d1 else None,
            s2=int(self.s2[i]) if d2 else None,
        )

    @property
    def both_detected(self) -> np.ndarray:
        return self.detected1 & self.detected2

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pair", "u1", "u2", "tau1", "tau2", "winner", "tau", "outcome",
                    "t6", "t7", "detected1", "detected2", "s1", "s2"])
        cand = [c if isinstance(c, str) else repr(float(c)) for c in self.candidates]
        integer_outcome = np.issubdtype(self.outcome.dtype, np.integer)
        for i in range(len(self)):
            d1, d2 = bool(self.detected1[i]), bool(self.detected2[i])
            w.writerow([
                i, cand[self.u1_index[i]], cand[self.u2_index[i]],
                repr(float(self.tau1[i])), repr(float(self.tau2[i])), int(self.winner[i]),
                repr(float(self.tau[i])),
                int(self.outcome[i]) if integer_outcome else repr(float(self.outcome[i])),
                repr(float(self.t6[i])), repr(float(self.t7[i])), int(d1), int(d2),
                int(self.s1[i]) if d1 else "", int(self.s2[i]) if d2 else "",
            ])
        return buf.getvalue()


def detection(t6, t7, cfg: SpacetimeConfig, t8=None, t9=None) -> tuple[np.ndarray, np.ndarray]:
    """Station detects iff its polarizer was open on arrival and the outcome
    returned before its shutter closed (``None`` = never shuts)."""
    t3, t4 = cfg.open_times
    t5 = cfg.arrival_time
    d1 = np.full(np.shape(t6), t3 <= t5)
    d2 = np.full(np.shape(t7), t4 <= t5)
    if t8 is not None:
        d1 = d1 & (t6 <= t8)
    if t9 is not None:
        d2 = d2 & (t7 <= t9)
    return d1, d2


def _simulate(cfg: SpacetimeConfig, sys: GaugeSystem, candidates: tuple, lo: int, hi: int) -> dict:
    n = hi - lo
    stream = RandomStream(cfg.seed, STREAM_PROTOCOL)
    raw = stream.ints53(_STRIDE * lo, _STRIDE * n).reshape(n, _STRIDE)
    uni = raw.astype(np.float64) * 2.0**-53
    T, t5 = cfg.T, cfg.arrival_time

    tau1 = cfg.ignition_tau1(uni[:, 0])
    tau2 = T - tau1
    coin1 = uni[:, 1] < 0.5
    winner = np.where(tau1 < tau2, 1, np.where(tau2 < tau1, 2, np.where(coin1, 1, 2))).astype(np.int8)

    k = len(candidates)
    if cfg.argument_policy == "fixed":
        i1 = np.zeros(n, dtype=np.int8)
        i2 = np.ones(n, dtype=np.int8)
    else:
        i1 = np.minimum((uni[:, 2] * k).astype(np.int64), k - 1).astype(np.int8)
        i2 = np.minimum((uni[:, 3] * k).astype(np.int64), k - 1).astype(np.int8)
    iw = np.where(winner == 1, i1, i2)

    if sys.kind == "discrete":
        outcome = np.zeros(n, dtype=np.int64)
    else:
        outcome = np.zeros(n, dtype=np.float64)
    s1 = np.zeros(n, dtype=np.int8)
    s2 = np.zeros(n, dtype=np.int8)
    for j, u in enumerate(candidates):
        sel = iw == j
        if np.any(sel):
            dist = sys.distribution(u)
            if sys.kind == "discrete":
                outcome[sel] = discrete_from_ints(dist, raw[sel, 4])
            else:
                outcome[sel] = continuous_from_uniforms(dist, uni[sel, 4], uni[sel, 5])
    for j, u in enumerate(candidates):
        sel = i1 == j
        if np.any(sel):
            s1[sel] = sys.observable(u, outcome[sel])
        sel = i2 == j
        if np.any(sel):
            s2[sel] = sys.observable(u, outcome[sel])
    if sys.anticorrelated:
        s2 = -s2

    first = np.minimum(tau1, tau2)
    tau = t5 + first
    # the late side always completes at t5 + T; the early side after a round trip
    early = t5 + np.minimum(2.0 * first, T)
    late = np.full(n, t5 + T)
    t6 = np.where(winner == 1, early, late)
    t7 = np.where(winner == 1, late, early)
    return dict(u1_index=i1, u2_index=i2, tau1=tau1, tau2=tau2, winner=winner, tau=tau,
                outcome=outcome, t6=t6, t7=t7, s1=s1, s2=s2)


def simulate_timelines(cfg: SpacetimeConfig, threads: int = 1) -> Timelines:
    sys = cfg.system()
    candidates = tuple(sys.canonical_argument(u) for u in cfg.arguments)
    parts = run_chunked(lambda lo, hi: _simulate(cfg, sys, candidates, lo, hi), int(cfg.n), threads)
    merged = {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
    return Timelines(config=cfg, candidates=candidates, **merged)


# ---------------------------------------------------------------------------
# analysis


def causality_violations(tl: Timelines) -> int:
    """Count pairs whose timeline breaks causal ordering or the window [t5, t5 + T]."""
    cfg = tl.config
    t5, T = cfg.arrival_time, cfg.T
    t3, t4 = cfg.open_times
    first = np.minimum(tl.tau1, tl.tau2)
    ok = (
        (tl.tau1 >= 0) & (tl.tau2 >= 0)
        & (tl.tau >= t5) & (tl.tau == t5 + first)
        & (tl.t6 >= tl.tau) & (tl.t7 >= tl.tau)
        & (tl.t6 >= t5) & (tl.t7 >= t5)
        & (tl.t6 <= t5 + T) & (tl.t7 <= t5 + T)
        & (np.maximum(tl.t6, tl.t7) == t5 + T)
        & (t5 >= t3) & (t5 >= t4)
    )
    return int(np.count_nonzero(~ok))


def risetime_stats(tl: Timelines, bins: int = 20) -> dict[str, Any]:
    """Completion delays t6 - t5 and t7 - t5."""
    if len(tl) < 1:
        raise ConfigurationError("need at least one timeline")
    cfg = tl.config
    d1 = tl.t6 - cfg.arrival_time
    d2 = tl.t7 - cfg.arrival_time
    lo = np.minimum(d1, d2)
    hi = np.maximum(d1, d2)
    top = cfg.T if cfg.T > 0 else 1.0
    edges = np.linspace(0.0, top, bins + 1)
    n = len(tl)
    return {
        "T": cfg.T,
        "mean_t6_minus_t5": float(d1.mean()),
        "mean_t7_minus_t5": float(d2.mean()),
        "max_completion": float(hi.max()),
        "mean_min_completion": float(lo.mean()),
        "sd_min_completion": float(lo.std(ddof=1)) if n > 1 else 0.0,
        "sem_min_completion": float(lo.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "mean_max_completion": float(hi.mean()),
        "histogram": {
            "edges": edges.tolist(),
            "t6": np.histogram(d1, edges)[0].tolist(),
            "t7": np.histogram(d2, edges)[0].tolist(),
        },
    }


def risetime_scaling(cfg: SpacetimeConfig, totals: Sequence[float], threads: int = 1) -> list[dict[str, float]]:
    out = []
    for T in totals:
        stats = risetime_stats(simulate_timelines(replace(cfg, T=float(T)), threads))
        out.append({"T": float(T), "max_completion": stats["max_completion"],
                    "mean_min_completion": stats["mean_min_completion"]})
    return out


def _pair_key(tl: Timelines, i: int, j: int) -> str:
    def name(u):
        return u if isinstance(u, str) else f"{float(u):.6g}"
    return f"{name(tl.candidates[i])}|{name(tl.candidates[j])}"


def pair_correlations(tl: Timelines) -> list[dict[str, Any]]:
    """Full-ensemble vs detected-pair correlation per unordered argument pair."""
    both = tl.both_detected
    prod = tl.s1.astype(np.int64) * tl.s2.astype(np.int64)
    k = len(tl.candidates)
    if tl.config.argument_policy == "fixed":
        combos = [(0, 1)]
    else:
        combos = list(itertools.combinations(range(k), 2))
    rows = []
    for i, j in combos:
        sel = ((tl.u1_index == i) & (tl.u2_index == j)) | ((tl.u1_index == j) & (tl.u2_index == i))
        n_full = int(np.count_nonzero(sel))
        n_det = int(np.count_nonzero(sel & both))
        full = float(prod[sel].sum()) / n_full if n_full else None
        det = float(prod[sel & both].sum()) / n_det if n_det else None
        sigma = math.sqrt(max(1.0 - full * full, 0.0) / n_det) if (n_det and full is not None) else None
        agree = None if det is None else abs(det - full) <= SIGMAS * sigma
        rows.append({"pair": _pair_key(tl, i, j), "u": tl.candidates[i], "v": tl.candidates[j],
                     "n_full": n_full, "full": full, "n_detected": n_det, "detected": det,
                     "sigma_detected": sigma, "agree": agree})
    return rows


def protocol_bell(tl: Timelines, sys: GaugeSystem | None = None) -> dict[str, Any] | None:
    """Bell evaluation from detected pairs for the first three candidate arguments."""
    if tl.config.argument_policy != "uniform" or len(tl.candidates) < 3:
        return None
    sys = sys or tl.config.system()
    rows = {(r["u"], r["v"]): r for r in pair_correlations(tl)}
    a, b, c = tl.candidates[:3]
    est, ref, ok = [], [], []
    for u, v in ((a, b), (a, c), (b, c)):
        r = rows[(u, v)]
        if r["detected"] is None:
            return None
        exact = float(correlation(sys, u, v))
        sigma = math.sqrt(max(1.0 - exact * exact, 0.0) / r["n_detected"])
        est.append(r["detected"])
        ref.append(exact)
        ok.append(abs(r["detected"] - exact) <= SIGMAS * max(sigma, 1.0 / r["n_detected"]))
    empirical = bell_check(*est, arguments=(a, b, c), source="empirical")
    reference = bell_check(*ref, arguments=(a, b, c), source="exact")
    return {
        "empirical": empirical.to_dict(),
        "reference": reference.to_dict(),
        "within_tolerance": all(ok),
        "reproduces_violation": bool(empirical.violated == reference.violated and all(ok)),
    }


@dataclass
class ProtocolRun:
    timelines: Timelines
    summary: dict[str, Any]

    def to_json(self) -> str:
        return dumps(self.summary)


def summarize(tl: Timelines) -> dict[str, Any]:
    cfg = tl.config
    both = tl.both_detected
    corr = pair_correlations(tl)
    rise = risetime_stats(tl)
    violations = causality_violations(tl)
    yielded = float(both.mean())
    invariance = all(r["agree"] for r in corr if r["agree"] is not None)
    summary = {
        "config": config_to_dict(cfg),
        "n": len(tl),
        "yield": yielded,
        "detection_rate_1": float(tl.detected1.mean()),
        "detection_rate_2": float(tl.detected2.mean()),
        "winner_1_fraction": float(np.mean(tl.winner == 1)),
        "risetime": rise,
        "causality_violations": violations,
        "correlations": corr,
        "detection_invariance": invariance,
        "bell": protocol_bell(tl),
    }
    summary["pass"] = bool(violations == 0 and invariance and
                           (summary["bell"] is None or summary["bell"]["within_tolerance"]))
    return summary


def run_protocol(cfg: SpacetimeConfig, threads: int = 1) -> ProtocolRun:
    tl = simulate_timelines(cfg, threads)
    return ProtocolRun(tl, summarize(tl))


def yield_curve(
    cfg: SpacetimeConfig,
    margins: Sequence[float],
    sides: str = "both",
    threads: int = 1,
    timelines: Timelines | None = None,
) -> list[tuple[float, float]]:
    """Yield with shutters at t5 + delta on ``sides`` ("both", "1" or "2").

    One set of timelines is reused for every delta, so the curve is exactly
    monotone in delta.
    """
    if sides not in ("both", "1", "2"):
        raise ConfigurationError(f"sides must be 'both', '1' or '2', got {sides!r}")
    tl = timelines if timelines is not None else simulate_timelines(replace(cfg, shutter_times=None), threads)
    t3, t4 = cfg.open_times
    out = []
    for delta in margins:
        delta = float(delta)
        if delta < 0:
            raise ConfigurationError(f"shutter margin must be >= 0, got {delta}")
        shut = cfg.arrival_time + delta
        t8 = shut if sides in ("both", "1") else None
        t9 = shut if sides in ("both", "2") else None
        if (t8 is not None and not t8 > t3) or (t9 is not None and not t9 > t4):
            raise ConfigurationError(f"shutter at t5 + {delta} does not close after the polarizer opens")
        d1, d2 = detection(tl.t6, tl.t7, cfg, t8, t9)
        out.append((delta, float(np.mean(d1 & d2))))
    return out


def yield_csv(curve: Sequence[tuple[float, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "yield"])
    for d, y in curve:
        w.writerow([repr(float(d)), repr(float(y))])
    return buf.getvalue()


def config_to_dict(cfg: SpacetimeConfig) -> dict[str, Any]:
    return {
        "T": cfg.T,
        "ignition": cfg.ignition,
        "ignition_value": cfg.ignition_value,
        "t1": cfg.t1,
        "t2": cfg.t2,
        "open_times": list(cfg.open_times),
        "arrival_time": cfg.arrival_time,
        "shutter_times": None if cfg.shutter_times is None else list(cfg.shutter_times),
        "argument_policy": cfg.argument_policy,
        "arguments": list(cfg.arguments),
        "model": cfg.model,
        "n": int(cfg.n),
        "seed": int(cfg.seed),
    }


def write_text(path, text: str) -> None:
    Path(path).write_text(text, newline="")
