"""Built-in gauge systems: the six-outcome table, the circle model, and a
Kolmogorov (argument-independent) control."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable

import numpy as np

from gaugesim.core import (
    Argument,
    ContinuousFamily,
    ContinuousGaugeSystem,
    DiscreteGaugeSystem,
    GaugeSystem,
    as_fraction,
    effective_distribution,
    reduce_angle,
)
from gaugesim.errors import ConfigurationError
from gaugesim.sampler import circle_inverse_cdf

HALF_PI = 0.5 * math.pi

TABLE1_OUTCOMES = ("l1", "l2", "l3", "l4", "l5", "l6")
TABLE1_SIGNS = {
    "a": (+1, -1, -1, -1, +1, +1),
    "b": (+1, +1, -1, -1, -1, +1),
    "c": (+1, +1, +1, -1, -1, -1),
}
TABLE1_MASSES = {
    "a": tuple(Fraction(n, 12) for n in (3, 1, 2, 3, 1, 2)),
    "b": tuple(Fraction(n, 12) for n in (4, 1, 1, 4, 1, 1)),
    "c": tuple(Fraction(n, 12) for n in (3, 2, 1, 3, 2, 1)),
}


def table1_system(m=1, anticorrelated: bool = False) -> DiscreteGaugeSystem:
    return DiscreteGaugeSystem(
        outcomes=TABLE1_OUTCOMES,
        signs=TABLE1_SIGNS,
        masses=TABLE1_MASSES,
        m=as_fraction(m),
        anticorrelated=anticorrelated,
        name="table1",
    )


def perturbed_table1_system(m=1) -> DiscreteGaugeSystem:
    """Negative control: the table with p_b(l1) and p_b(l2) swapped.

    Breaks both consistency conditions for the pair (a, b).
    """
    masses = dict(TABLE1_MASSES)
    pb = list(masses["b"])
    pb[0], pb[1] = pb[1], pb[0]
    masses["b"] = tuple(pb)
    return DiscreteGaugeSystem(TABLE1_OUTCOMES, TABLE1_SIGNS, masses, m=as_fraction(m), name="table1-perturbed")


# --- continuous models ------------------------------------------------------


def cos_sign(u: float, lam: np.ndarray) -> np.ndarray:
    # sgn(0) := +1; the tie set has measure zero
    return np.where(np.cos(np.asarray(lam, dtype=float) - u) >= 0.0, 1, -1).astype(np.int8)


def quarter_points(u: float) -> tuple[float, float]:
    return (reduce_angle(u + HALF_PI), reduce_angle(u - HALF_PI))


def _abs_cos_density(u: float, lam: np.ndarray) -> np.ndarray:
    return 0.25 * np.abs(np.cos(np.asarray(lam, dtype=float) - u))


def _uniform_density(u: float, lam: np.ndarray) -> np.ndarray:
    return np.full(np.shape(lam), 1.0 / (2.0 * math.pi))


def _uniform_inverse_cdf(u: float, v, w) -> np.ndarray:
    return reduce_angle(2.0 * math.pi * np.asarray(v, dtype=float))


ABS_COS_FAMILY = ContinuousFamily("abs-cos", _abs_cos_density, quarter_points, circle_inverse_cdf)
UNIFORM_FAMILY = ContinuousFamily("uniform", _uniform_density, lambda u: (), _uniform_inverse_cdf)


def circle_system(m=1.0, anticorrelated: bool = False) -> ContinuousGaugeSystem:
    """p_u(lam) = |cos(lam - u)| / 4 with F(u, lam) = sgn(cos(lam - u))."""
    return ContinuousGaugeSystem(
        family=ABS_COS_FAMILY,
        sign=cos_sign,
        sign_breaks=quarter_points,
        m=float(m),
        anticorrelated=anticorrelated,
        name="circle",
    )


def kolmogorov_system(m=1.0, anticorrelated: bool = False) -> ContinuousGaugeSystem:
    """Uniform outcome law shared by all arguments; same observable as the circle model."""
    return ContinuousGaugeSystem(
        family=UNIFORM_FAMILY,
        sign=cos_sign,
        sign_breaks=quarter_points,
        m=float(m),
        anticorrelated=anticorrelated,
        name="kolmogorov-uniform",
        decoupled=True,
    )


MODELS: dict[str, Callable[..., GaugeSystem]] = {
    "table1": table1_system,
    "circle": circle_system,
    "kolmogorov-uniform": kolmogorov_system,
}


def get_model(name: str, m=None, anticorrelated: bool = False) -> GaugeSystem:
    try:
        factory = MODELS[name]
    except KeyError:
        raise ConfigurationError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    if m is None:
        return factory(anticorrelated=anticorrelated)
    return factory(m=m, anticorrelated=anticorrelated)


# --- closed forms -------------------------------------------------------------


def exact_correlation_discrete(sys: DiscreteGaugeSystem, u1: Argument, u2: Argument, m=None) -> Fraction:
    """sum_i F(u1, l_i) F(u2, l_i) rho_{u1 u2}(l_i), exactly."""
    dist = effective_distribution(sys, u1, u2, m)
    a, b = dist.arguments
    total = sum(
        (sa * sb * p for sa, sb, p in zip(sys.signs[a], sys.signs[b], dist.weights)),
        Fraction(0),
    )
    return -total if sys.anticorrelated else total


def exact_correlation_circle(a: float, b: float) -> float:
    return math.cos(a - b)


def parametric_mean_circle(measured: float, dist_arg: float) -> float:
    """E_{dist_arg}[s_measured] for the circle model; zero for every pair."""
    return 0.0


def kolmogorov_correlation(a: float, b: float) -> float:
    """E[sgn cos(lam - a) sgn cos(lam - b)] for lam uniform: 1 - 2 d / pi."""
    d = abs(reduce_angle(a - b))
    d = min(d, 2.0 * math.pi - d)
    return 1.0 - 2.0 * d / math.pi
