"""Contextual ("stochastic gauge") probability systems.

A gauge system fixes an outcome space, one parametric distribution per
measurement argument and a dichotomic observable ``F(u, outcome)``. The
distribution actually governing a trial is the mixture

    rho_{u1 u2} = m * p_{u1} + (1 - m) * p_{u2}

of the two selected arguments' distributions. Discrete systems keep every
mass as an exact :class:`fractions.Fraction`; continuous systems live on the
unit circle and carry callables plus the points where those callables stop
being smooth, which the quadrature needs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from types import MappingProxyType
from typing import Any, Callable, Mapping, Sequence, Union

import numpy as np

from gaugesim.errors import ConfigurationError, DomainError
from gaugesim.quadrature import TWO_PI, integrate_circle

Argument = Union[str, float]
OutcomeId = Union[int, float]


def reduce_angle(x):
    """Map an angle (scalar or array) into [0, 2*pi)."""
    if np.ndim(x) == 0:
        r = math.fmod(float(x), TWO_PI)
        if r < 0.0:
            r += TWO_PI
        return 0.0 if r >= TWO_PI else r
    r = np.mod(np.asarray(x, dtype=float), TWO_PI)
    return np.where(r >= TWO_PI, 0.0, r)


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12) if not value.is_integer() else Fraction(int(value))
    return Fraction(value)


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class DiscreteDistribution:
    """Exact probability masses over outcomes ``0..K-1``.

    ``arguments`` records which argument(s) produced the distribution: one
    label for a parametric distribution, two for a mixture.
    """

    arguments: tuple[str, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        weights = tuple(as_fraction(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        if not weights:
            raise ConfigurationError("distribution needs at least one outcome")
        if any(w < 0 for w in weights):
            raise ConfigurationError(f"negative mass in distribution for {self.arguments}")
        total = sum(weights, Fraction(0))
        if total != 1:
            raise ConfigurationError(f"masses for {self.arguments} sum to {total}, not 1")

    def __len__(self) -> int:
        return len(self.weights)

    def mass(self, outcomes) -> Fraction:
        return sum((self.weights[i] for i in outcomes), Fraction(0))


@dataclass(frozen=True)
class ContinuousFamily:
    """A parametric family of densities on the circle, indexed by an angle.

    density(u, lam)      -> density values, vectorised over ``lam``
    kinks(u)             -> angles where the density is not analytic
    inverse_cdf(u, v, w) -> outcomes from two uniform arrays
    """

    name: str
    density: Callable[[float, np.ndarray], np.ndarray]
    kinks: Callable[[float], tuple[float, ...]]
    inverse_cdf: Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ContinuousDistribution:
    """A finite mixture of members of one :class:`ContinuousFamily`."""

    family: ContinuousFamily
    components: tuple[tuple[float, float], ...]  # (weight, argument angle)

    def __post_init__(self):
        comps = tuple((float(w), reduce_angle(u)) for w, u in self.components if w != 0)
        if not comps:
            raise ConfigurationError("continuous distribution has no components")
        if any(w < 0 for w, _ in comps):
            raise ConfigurationError("negative mixture weight")
        if abs(math.fsum(w for w, _ in comps) - 1.0) > 1e-12:
            raise ConfigurationError("mixture weights do not sum to 1")
        object.__setattr__(self, "components", comps)

    @property
    def arguments(self) -> tuple[float, ...]:
        return tuple(u for _, u in self.components)

    def density(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        out = np.zeros_like(lam)
        for w, u in self.components:
            out = out + w * self.family.density(u, lam)
        return out

    def breakpoints(self) -> tuple[float, ...]:
        pts: list[float] = []
        for _, u in self.components:
            pts.extend(self.family.kinks(u))
        return tuple(pts)

    def total_mass(self) -> float:
        return integrate_circle(self.density, self.breakpoints())


ParametricDistribution = Union[DiscreteDistribution, ContinuousDistribution]


# ---------------------------------------------------------------------------
# systems


def _freeze(mapping: Mapping) -> Mapping:
    return MappingProxyType(dict(mapping))


@dataclass(frozen=True, eq=False)
class DiscreteGaugeSystem:
    """Finite outcome set with exact per-argument masses and a sign table."""

    outcomes: tuple[str, ...]
    signs: Mapping[str, tuple[int, ...]]
    masses: Mapping[str, tuple[Fraction, ...]]
    m: Fraction = Fraction(1)
    anticorrelated: bool = False
    name: str = "discrete"

    def __post_init__(self):
        k = len(self.outcomes)
        if k == 0:
            raise ConfigurationError("empty outcome set")
        signs = {str(u): tuple(int(s) for s in col) for u, col in self.signs.items()}
        masses = {str(u): tuple(as_fraction(p) for p in col) for u, col in self.masses.items()}
        if set(signs) != set(masses):
            raise ConfigurationError(
                f"observable arguments {sorted(signs)} differ from distribution arguments {sorted(masses)}"
            )
        for u, col in signs.items():
            if len(col) != k or any(s not in (-1, 1) for s in col):
                raise ConfigurationError(f"observable column {u!r} must hold {k} values in {{-1, +1}}")
        for u, col in masses.items():
            if len(col) != k:
                raise ConfigurationError(f"mass column {u!r} has {len(col)} entries, expected {k}")
            DiscreteDistribution((u,), col)  # validates
        m = as_fraction(self.m)
        if not 0 <= m <= 1:
            raise ConfigurationError(f"mixing coefficient m={m} outside [0, 1]")
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "signs", _freeze(signs))
        object.__setattr__(self, "masses", _freeze(masses))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "_sign_arrays", {u: np.array(c, dtype=np.int8) for u, c in signs.items()})

    kind = "discrete"

    @property
    def arguments(self) -> tuple[str, ...]:
        return tuple(self.signs)

    @property
    def size(self) -> int:
        return len(self.outcomes)

    @property
    def is_decoupled(self) -> bool:
        cols = list(self.masses.values())
        return all(c == cols[0] for c in cols)

    def canonical_argument(self, u: Argument) -> str:
        if isinstance(u, str) and u in self.signs:
            return u
        raise ConfigurationError(f"unknown argument {u!r}; expected one of {self.arguments}")

    def check_outcome(self, lam) -> None:
        arr = np.asarray(lam)
        if arr.dtype.kind not in "iu" and not (
            arr.dtype.kind == "f" and np.all(np.mod(arr, 1) == 0)
        ):
            raise DomainError(f"outcome {lam!r} is not an outcome index")
        if np.any(arr < 0) or np.any(arr >= self.size):
            raise DomainError(f"outcome {lam!r} outside [0, {self.size})")

    def distribution(self, u: Argument) -> DiscreteDistribution:
        u = self.canonical_argument(u)
        return DiscreteDistribution((u,), self.masses[u])

    def observable(self, u: Argument, lam):
        """Vectorised F(u, lam) without domain checks."""
        col = self._sign_arrays[self.canonical_argument(u)]
        return col[np.asarray(lam, dtype=np.intp)]

    def with_m(self, m) -> "DiscreteGaugeSystem":
        return replace(self, m=as_fraction(m))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "discrete",
            "name": self.name,
            "outcomes": list(self.outcomes),
            "observable": {u: list(c) for u, c in self.signs.items()},
            "masses": {u: [str(p) for p in c] for u, c in self.masses.items()},
            "m": str(self.m),
            "anticorrelated": self.anticorrelated,
        }


@dataclass(frozen=True, eq=False)
class ContinuousGaugeSystem:
    """Gauge system on the unit circle.

    ``sign`` is the observable F(u, lam) (vectorised over lam) and
    ``sign_breaks(u)`` the angles where it jumps.
    """

    family: ContinuousFamily
    sign: Callable[[float, np.ndarray], np.ndarray]
    sign_breaks: Callable[[float], tuple[float, ...]]
    m: float = 1.0
    anticorrelated: bool = False
    name: str = "continuous"
    decoupled: bool = False
    params: Mapping[str, Any] = field(default_factory=dict)

    kind = "continuous"

    def __post_init__(self):
        m = float(self.m)
        if not 0.0 <= m <= 1.0:
            raise ConfigurationError(f"mixing coefficient m={m} outside [0, 1]")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "params", _freeze(self.params))

    @property
    def is_decoupled(self) -> bool:
        return self.decoupled

    def canonical_argument(self, u: Argument) -> float:
        if isinstance(u, str):
            raise ConfigurationError(f"continuous system needs an angle, got label {u!r}")
        u = float(u)
        if not math.isfinite(u):
            raise ConfigurationError(f"argument {u!r} is not a finite angle")
        return reduce_angle(u)

    def check_outcome(self, lam) -> None:
        arr = np.asarray(lam, dtype=float)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr >= TWO_PI):
            raise DomainError(f"outcome {lam!r} outside [0, 2*pi)")

    def distribution(self, u: Argument) -> ContinuousDistribution:
        return ContinuousDistribution(self.family, ((1.0, self.canonical_argument(u)),))

    def observable(self, u: Argument, lam):
        return self.sign(self.canonical_argument(u), np.asarray(lam, dtype=float))

    def with_m(self, m) -> "ContinuousGaugeSystem":
        return replace(self, m=float(m))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "builtin",
            "model": self.name,
            "m": self.m,
            "anticorrelated": self.anticorrelated,
        }


GaugeSystem = Union[DiscreteGaugeSystem, ContinuousGaugeSystem]


# ---------------------------------------------------------------------------
# operations


def effective_distribution(sys: GaugeSystem, u1: Argument, u2: Argument, m=None) -> ParametricDistribution:
    """The mixture ``m * p_{u1} + (1 - m) * p_{u2}`` (``m`` defaults to ``sys.m``)."""
    if isinstance(sys, DiscreteGaugeSystem):
        m = sys.m if m is None else as_fraction(m)
        if not 0 <= m <= 1:
            raise ConfigurationError(f"mixing coefficient m={m} outside [0, 1]")
        a, b = sys.canonical_argument(u1), sys.canonical_argument(u2)
        weights = tuple(m * p + (1 - m) * q for p, q in zip(sys.masses[a], sys.masses[b]))
        return DiscreteDistribution((a, b), weights)
    m = sys.m if m is None else float(m)
    if not 0.0 <= m <= 1.0:
        raise ConfigurationError(f"mixing coefficient m={m} outside [0, 1]")
    a, b = sys.canonical_argument(u1), sys.canonical_argument(u2)
    if a == b:
        return ContinuousDistribution(sys.family, ((1.0, a),))
    return ContinuousDistribution(sys.family, ((m, a), (1.0 - m, b)))


def observe(sys: GaugeSystem, u: Argument, lam: OutcomeId, station: int = 1) -> int:
    """Spin ``F(u, lam)`` seen at ``station``.

    With ``sys.anticorrelated`` the second station reports the negated value.
    """
    if station not in (1, 2):
        raise ConfigurationError(f"station must be 1 or 2, got {station}")
    sys.check_outcome(lam)
    s = int(sys.observable(u, lam))
    return -s if (station == 2 and sys.anticorrelated) else s


def _sign_filter(values, wanted):
    return np.ones(np.shape(values), dtype=bool) if wanted is None else (values == wanted)


def event_probability(
    sys: GaugeSystem,
    u1: Argument,
    u2: Argument,
    s1: int | None = None,
    s2: int | None = None,
    m=None,
):
    """Probability of ``{F(u1, .) = s1} & {F(u2, .) = s2}`` under ``rho_{u1 u2}``.

    Leaving a sign as ``None`` drops that constraint, so ``s1=s2=None`` is the
    whole outcome space. Exact :class:`Fraction` for discrete systems.
    """
    for s in (s1, s2):
        if s not in (None, -1, 1):
            raise ConfigurationError(f"event sign must be -1, +1 or None, got {s!r}")
    dist = effective_distribution(sys, u1, u2, m)
    if isinstance(sys, DiscreteGaugeSystem):
        idx = np.arange(sys.size)
        keep = _sign_filter(sys.observable(u1, idx), s1) & _sign_filter(sys.observable(u2, idx), s2)
        return dist.mass(np.flatnonzero(keep))
    a, b = sys.canonical_argument(u1), sys.canonical_argument(u2)

    def integrand(lam):
        keep = _sign_filter(sys.sign(a, lam), s1) & _sign_filter(sys.sign(b, lam), s2)
        return np.where(keep, dist.density(lam), 0.0)

    breaks = list(dist.breakpoints())
    if s1 is not None:
        breaks.extend(sys.sign_breaks(a))
    if s2 is not None:
        breaks.extend(sys.sign_breaks(b))
    return integrate_circle(integrand, breaks)


# ---------------------------------------------------------------------------
# JSON definitions


def system_from_dict(doc: Mapping[str, Any]) -> GaugeSystem:
    """Build a system from its JSON form.

    ``{"kind": "discrete", "outcomes": [...], "observable": {arg: [+-1...]},
    "masses": {arg: ["3/12", ...]}, "m": "1"}`` or
    ``{"kind": "builtin", "model": "circle", "m": 1}``.
    """
    kind = doc.get("kind", "discrete" if "masses" in doc else "builtin")
    anti = bool(doc.get("anticorrelated", False))
    if kind == "discrete":
        try:
            return DiscreteGaugeSystem(
                outcomes=tuple(doc["outcomes"]),
                signs=doc["observable"],
                masses=doc["masses"],
                m=as_fraction(doc.get("m", 1)),
                anticorrelated=anti,
                name=str(doc.get("name", "discrete")),
            )
        except KeyError as exc:
            raise ConfigurationError(f"discrete system definition lacks field {exc}") from None
        except (TypeError, ZeroDivisionError) as exc:
            raise ConfigurationError(f"bad discrete system definition: {exc}") from None
    if kind == "builtin":
        from gaugesim.models import get_model

        if "model" not in doc:
            raise ConfigurationError("builtin system definition lacks field 'model'")
        return get_model(doc["model"], m=doc.get("m"), anticorrelated=anti)
    raise ConfigurationError(f"unknown system kind {kind!r}")


def system_from_json(text: str) -> GaugeSystem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"system definition is not valid JSON: {exc}") from None
    return system_from_dict(doc)


def arguments_of(sys: GaugeSystem, args: Sequence[Argument]) -> list[Argument]:
    return [sys.canonical_argument(u) for u in args]
