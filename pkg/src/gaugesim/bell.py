"""Observable arrays, Hamming distances and the three-argument Bell inequality

    |M(a, b) - M(a, c)| <= 1 - M(b, c).

Empirical correlations are computed as integer sums of +-1 products and
returned as exact fractions, so identities such as ``d = (1 - M) / 2`` hold
with no rounding at all.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from gaugesim.core import Argument, GaugeSystem, effective_distribution
from gaugesim.errors import ConfigurationError
from gaugesim.serialize import parse_number, to_jsonable
from gaugesim.sampler import (
    STREAM_PAIRS,
    STREAM_TRIPLE,
    RandomStream,
    sample_outcomes,
)

ROUNDOFF = 1e-9


@dataclass(frozen=True, eq=False)
class ObservableArray:
    argument: Argument
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("observable array must be one-dimensional and non-empty")
        if not np.all((vals == 1) | (vals == -1)):
            raise ValueError("observable array entries must be -1 or +1")
        vals = vals.astype(np.int8)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return int(self.values.size)

    def bits(self) -> np.ndarray:
        """x_i = (1 + s_i) / 2."""
        return ((self.values + 1) // 2).astype(np.uint8)

    def __neg__(self) -> "ObservableArray":
        return ObservableArray(self.argument, -self.values.astype(np.int16))


def _check_lengths(x, y) -> None:
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} != {len(y)}")


def hamming_distance(x, y) -> int:
    """Number of positions where two equal-length bit words differ."""
    x = np.asarray(x)
    y = np.asarray(y)
    _check_lengths(x, y)
    return int(np.count_nonzero(x != y))


def normalized_distance(s1: ObservableArray, s2: ObservableArray) -> Fraction:
    _check_lengths(s1, s2)
    return Fraction(hamming_distance(s1.bits(), s2.bits()), len(s1))


def empirical_correlation(s1: ObservableArray, s2: ObservableArray) -> Fraction:
    _check_lengths(s1, s2)
    total = int(np.dot(s1.values.astype(np.int64), s2.values.astype(np.int64)))
    return Fraction(total, len(s1))


def correlation_sigma(m: float, n: int) -> float:
    """Binomial standard error of a +-1 product mean with expectation m."""
    return math.sqrt(max(1.0 - float(m) ** 2, 0.0) / n)


@dataclass(frozen=True)
class BellEvaluation:
    lhs: Any
    rhs: Any
    violated: bool
    arguments: tuple = ()
    source: str = "exact"
    correlations: tuple = ()

    @property
    def margin(self):
        return self.lhs - self.rhs

    def describe(self) -> str:
        rel = ">" if self.violated else "<="
        word = "VIOLATED" if self.violated else "satisfied"
        return f"{word} ({_fmt(self.lhs)} {rel} {_fmt(self.rhs)})"

    def to_dict(self) -> dict[str, Any]:
        return {
            "lhs": to_jsonable(self.lhs),
            "rhs": to_jsonable(self.rhs),
            "margin": to_jsonable(self.margin),
            "violated": self.violated,
            "arguments": to_jsonable(list(self.arguments)),
            "source": self.source,
            "correlations": {k: to_jsonable(v) for k, v in zip(("ab", "ac", "bc"), self.correlations)},
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "BellEvaluation":
        corr = doc.get("correlations", {})
        return cls(
            lhs=parse_number(doc["lhs"]),
            rhs=parse_number(doc["rhs"]),
            violated=bool(doc["violated"]),
            arguments=tuple(parse_number(a) for a in doc.get("arguments", ())),
            source=doc.get("source", "exact"),
            correlations=tuple(parse_number(corr[k]) for k in ("ab", "ac", "bc") if k in corr),
        )


def _fmt(x) -> str:
    return str(x) if isinstance(x, Fraction) else f"{x:.6g}"


def bell_check(mab, mac, mbc, arguments: Sequence = (), source: str = "exact") -> BellEvaluation:
    """Evaluate both sides of the inequality; strict ``>`` flags a violation."""
    vals = []
    for name, val in (("M(a,b)", mab), ("M(a,c)", mac), ("M(b,c)", mbc)):
        if not isinstance(val, Fraction):
            # quadrature can overshoot +-1 by a few ulps
            if abs(val) <= 1 + ROUNDOFF:
                val = min(max(val, -1.0), 1.0)
        if not -1 <= val <= 1:
            raise ValueError(f"{name}={val} outside [-1, 1]")
        vals.append(val)
    mab, mac, mbc = vals
    lhs = abs(mab - mac)
    rhs = 1 - mbc
    return BellEvaluation(lhs, rhs, bool(lhs > rhs), tuple(arguments), source, (mab, mac, mbc))


def empirical_bell(sa: ObservableArray, sb: ObservableArray, sc: ObservableArray) -> BellEvaluation:
    return bell_check(
        empirical_correlation(sa, sb),
        empirical_correlation(sa, sc),
        empirical_correlation(sb, sc),
        arguments=(sa.argument, sb.argument, sc.argument),
        source="empirical",
    )


# ---------------------------------------------------------------------------
# sampling


def shared_outcome_triple(
    sys: GaugeSystem, args: Sequence[Argument], n: int, seed: int, threads: int = 1
) -> tuple[ObservableArray, ObservableArray, ObservableArray]:
    """Three arrays read off one outcome array through F under a, b and c.

    Only meaningful when one distribution serves every argument.
    """
    if not sys.is_decoupled:
        raise ConfigurationError(f"{sys.name}: shared outcome arrays need an argument-independent distribution")
    if len(args) != 3:
        raise ConfigurationError("need exactly three arguments")
    if n < 1:
        raise ConfigurationError("N must be >= 1")
    a, b, c = (sys.canonical_argument(u) for u in args)
    lam = sample_outcomes(sys.distribution(a), RandomStream(seed, STREAM_TRIPLE), n, threads=threads)
    return tuple(ObservableArray(u, sys.observable(u, lam)) for u in (a, b, c))


def sample_pair_arrays(
    sys: GaugeSystem,
    u1: Argument,
    u2: Argument,
    n: int,
    seed: int,
    m=None,
    threads: int = 1,
) -> tuple[ObservableArray, ObservableArray]:
    """Station arrays for N trials drawn from the effective distribution of (u1, u2)."""
    if n < 1:
        raise ConfigurationError("N must be >= 1")
    dist = effective_distribution(sys, u1, u2, m)
    a, b = sys.canonical_argument(u1), sys.canonical_argument(u2)
    lam = sample_outcomes(dist, RandomStream(seed, STREAM_PAIRS), n, threads=threads)
    s1 = sys.observable(a, lam)
    s2 = sys.observable(b, lam)
    if sys.anticorrelated:
        s2 = -s2.astype(np.int16)
    return ObservableArray(a, s1), ObservableArray(b, s2)


# ---------------------------------------------------------------------------
# CSV


def _header(u) -> str:
    return u if isinstance(u, str) else repr(float(u))


def arrays_to_csv(arrays: Sequence[ObservableArray]) -> str:
    if not arrays:
        raise ValueError("no arrays to export")
    n = len(arrays[0])
    for arr in arrays[1:]:
        _check_lengths(arrays[0], arr)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([_header(a.argument) for a in arrays])
    cols = np.stack([a.values for a in arrays], axis=1)
    for i in range(n):
        w.writerow([int(v) for v in cols[i]])
    return buf.getvalue()


def write_arrays_csv(path, arrays: Sequence[ObservableArray]) -> None:
    Path(path).write_text(arrays_to_csv(arrays), newline="")


def read_arrays_csv(path) -> list[ObservableArray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    data = np.array([[int(v) for v in r] for r in body], dtype=np.int8).reshape(len(body), len(header))
    out = []
    for j, name in enumerate(header):
        try:
            arg: Argument = float(name)
        except ValueError:
            arg = name
        out.append(ObservableArray(arg, data[:, j]))
    return out
