"""Consistency checks on parametric expectations.

For every ordered pair of arguments (a, b) a gauge system must satisfy

    E_a[s_a] == E_b[s_a]              (single-observable means agree)
    E_a[s_a s_b] == E_b[s_a s_b]      (product means agree)

where E_u is the expectation under p_u alone. Discrete systems are summed
exactly, continuous ones integrated piecewise, and either can be estimated
by Monte Carlo as a cross-check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from gaugesim.core import (
    Argument,
    ContinuousGaugeSystem,
    DiscreteDistribution,
    DiscreteGaugeSystem,
    GaugeSystem,
    ParametricDistribution,
    effective_distribution,
)
from gaugesim.errors import ConfigurationError
from gaugesim.quadrature import DEFAULT_ORDER, integrate_circle
from gaugesim.sampler import DEFAULT_SEED, STREAM_EXPECTATION, RandomStream, sample_outcomes
from gaugesim.serialize import dumps, to_jsonable

QUADRATURE_TOL = 1e-9
MC_SIGMAS = 4.0


def expectation(sys: GaugeSystem, dist: ParametricDistribution, observables: Sequence[Argument], order: int = DEFAULT_ORDER):
    """E[prod_u F(u, lam)] for lam ~ ``dist``."""
    obs = [sys.canonical_argument(u) for u in observables]
    if isinstance(dist, DiscreteDistribution):
        idx = np.arange(len(dist))
        prod = np.ones(len(dist), dtype=np.int64)
        for u in obs:
            prod = prod * sys.observable(u, idx)
        return sum((int(s) * p for s, p in zip(prod, dist.weights)), Fraction(0))

    def integrand(lam):
        out = dist.density(lam)
        for u in obs:
            out = out * sys.sign(u, lam)
        return out

    breaks = list(dist.breakpoints())
    for u in obs:
        breaks.extend(sys.sign_breaks(u))
    return integrate_circle(integrand, breaks, order=order)


def parametric_expectation(sys: GaugeSystem, dist_arg: Argument, observables: Sequence[Argument], order: int = DEFAULT_ORDER):
    """E_{dist_arg}[prod of F(u, .) over ``observables``]; exact for discrete systems."""
    return expectation(sys, sys.distribution(dist_arg), observables, order)


def correlation(sys: GaugeSystem, u1: Argument, u2: Argument, m=None, order: int = DEFAULT_ORDER):
    """Station correlation E[s1 s2] under the effective distribution of (u1, u2)."""
    value = expectation(sys, effective_distribution(sys, u1, u2, m), (u1, u2), order)
    return -value if sys.anticorrelated else value


def monte_carlo_expectations(
    sys: GaugeSystem,
    dist_arg: Argument,
    products: Sequence[Sequence[Argument]],
    n: int,
    seed: int = DEFAULT_SEED,
    stream: int = 0,
    threads: int = 1,
) -> list[tuple[float, float]]:
    """Sample means and standard errors of several observable products, all from
    one sample of ``p_{dist_arg}``."""
    if n < 1:
        raise ConfigurationError("N must be >= 1")
    rs = RandomStream(seed, STREAM_EXPECTATION).substream(stream)
    lam = sample_outcomes(sys.distribution(dist_arg), rs, n, threads=threads)
    out = []
    for obs in products:
        prod = np.ones(n, dtype=np.int64)
        for u in obs:
            prod *= sys.observable(u, lam)
        mean = int(prod.sum()) / n
        out.append((mean, math.sqrt(max(1.0 - mean * mean, 0.0) / n)))
    return out


@dataclass
class PairConsistency:
    a: Argument
    b: Argument
    mean_under_a: Any  # E_a[s_a]
    mean_under_b: Any  # E_b[s_a]
    product_under_a: Any  # E_a[s_a s_b]
    product_under_b: Any  # E_b[s_a s_b]
    tol: Any

    @property
    def delta_mean(self):
        return abs(self.mean_under_a - self.mean_under_b)

    @property
    def delta_product(self):
        return abs(self.product_under_a - self.product_under_b)

    @property
    def passed(self) -> bool:
        return bool(self.delta_mean <= self.tol and self.delta_product <= self.tol)

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "b": self.b,
            "E_a[s_a]": self.mean_under_a,
            "E_b[s_a]": self.mean_under_b,
            "E_a[s_a s_b]": self.product_under_a,
            "E_b[s_a s_b]": self.product_under_b,
            "delta_mean": self.delta_mean,
            "delta_product": self.delta_product,
            "tol": self.tol,
            "pass": self.passed,
        }


@dataclass
class ConsistencyReport:
    system: str
    method: str
    arguments: tuple
    pairs: list[PairConsistency] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.pairs)

    def common_mean(self, u: Argument):
        """The argument-free E[s_u], or None unless every pair involving u agrees."""
        rows = [p for p in self.pairs if p.a == u]
        if not rows or not all(p.delta_mean <= p.tol for p in rows):
            return None
        return rows[0].mean_under_a

    def max_deltas(self) -> tuple:
        if not self.pairs:
            return (0, 0)
        return (max(p.delta_mean for p in self.pairs), max(p.delta_product for p in self.pairs))

    def to_dict(self) -> dict[str, Any]:
        return {
            "system": self.system,
            "method": self.method,
            "arguments": to_jsonable(list(self.arguments)),
            "pairs": [p.to_dict() for p in self.pairs],
            "common_means": {str(u): self.common_mean(u) for u in self.arguments},
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return dumps(self)

    def table(self) -> str:
        lines = [f"{'a':>10} {'b':>10} {'delta_mean':>12} {'delta_product':>14}  verdict"]
        for p in self.pairs:
            lines.append(
                f"{_short(p.a):>10} {_short(p.b):>10} {_short(p.delta_mean):>12} "
                f"{_short(p.delta_product):>14}  {'pass' if p.passed else 'FAIL'}"
            )
        return "\n".join(lines)


def _short(x) -> str:
    if isinstance(x, (str, Fraction)):
        return str(x)
    return f"{float(x):.3g}"


def verify_consistency(
    sys: GaugeSystem,
    arguments: Sequence[Argument],
    tol=None,
    method: str | None = None,
    n: int = 10**6,
    seed: int = DEFAULT_SEED,
    order: int = DEFAULT_ORDER,
    threads: int = 1,
) -> ConsistencyReport:
    """Check both conditions over all ordered pairs of distinct ``arguments``.

    A single distinct argument yields no pairs and passes vacuously.

    ``method`` is "exact" (discrete), "quadrature" (continuous) or
    "monte-carlo". Default tolerances: 0, 1e-9 and 4 standard errors of the
    difference, respectively.
    """
    args = []
    for u in arguments:
        cu = sys.canonical_argument(u)
        if cu not in args:
            args.append(cu)
    if not args:
        raise ConfigurationError("consistency needs at least one argument")
    if method is None:
        method = "exact" if isinstance(sys, DiscreteGaugeSystem) else "quadrature"
    if method == "exact" and not isinstance(sys, DiscreteGaugeSystem):
        raise ConfigurationError("exact verification needs a discrete system")
    if method == "quadrature" and not isinstance(sys, ContinuousGaugeSystem):
        raise ConfigurationError("quadrature verification needs a continuous system")

    report = ConsistencyReport(getattr(sys, "name", "system"), method, tuple(args))
    if method in ("exact", "quadrature"):
        default_tol = 0 if method == "exact" else QUADRATURE_TOL
        t = default_tol if tol is None else tol
        for a, b in itertools.permutations(args, 2):
            report.pairs.append(
                PairConsistency(
                    a,
                    b,
                    parametric_expectation(sys, a, (a,), order),
                    parametric_expectation(sys, b, (a,), order),
                    parametric_expectation(sys, a, (a, b), order),
                    parametric_expectation(sys, b, (a, b), order),
                    t,
                )
            )
        return report
    if method != "monte-carlo":
        raise ConfigurationError(f"unknown consistency method {method!r}")

    # one sample per distribution argument; every quantity under p_u is read off it
    per_arg = {}
    for k, u in enumerate(args):
        quantities = [(v,) for v in args] + [(v, w) for v, w in itertools.permutations(args, 2)]
        est = monte_carlo_expectations(sys, u, quantities, n, seed, stream=k, threads=threads)
        per_arg[u] = dict(zip(quantities, est))
    for a, b in itertools.permutations(args, 2):
        (ma, sa), (mb, sb) = per_arg[a][(a,)], per_arg[b][(a,)]
        (pa, spa), (pb, spb) = per_arg[a][(a, b)], per_arg[b][(a, b)]
        if tol is None:
            t = MC_SIGMAS * max(math.hypot(sa, sb), math.hypot(spa, spb), 1.0 / n)
        else:
            t = tol
        report.pairs.append(PairConsistency(a, b, ma, mb, pa, pb, t))
    return report
