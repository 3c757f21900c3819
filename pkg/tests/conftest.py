from __future__ import annotations

import math
from fractions import Fraction as F

import pytest

from gaugesim.models import circle_system, kolmogorov_system, perturbed_table1_system, table1_system

# Hand-typed copy of the six-outcome table, kept separate from the library data
# so that the tests check the library against an independent transcription.
SIGNS = {
    "a": (+1, -1, -1, -1, +1, +1),
    "b": (+1, +1, -1, -1, -1, +1),
    "c": (+1, +1, +1, -1, -1, -1),
}
MASSES = {
    "a": tuple(F(k, 12) for k in (3, 1, 2, 3, 1, 2)),
    "b": tuple(F(k, 12) for k in (4, 1, 1, 4, 1, 1)),
    "c": tuple(F(k, 12) for k in (3, 2, 1, 3, 2, 1)),
}


def hand_correlation(u1, u2, m=F(1), masses=MASSES):
    rho = [m * p + (1 - m) * q for p, q in zip(masses[u1], masses[u2])]
    return sum(s * t * r for s, t, r in zip(SIGNS[u1], SIGNS[u2], rho))


@pytest.fixture(scope="session")
def t1():
    return table1_system()


@pytest.fixture(scope="session")
def t1_bad():
    return perturbed_table1_system()


@pytest.fixture(scope="session")
def circle():
    return circle_system()


@pytest.fixture(scope="session")
def kolmo():
    return kolmogorov_system()


SQRT_HALF = math.sqrt(0.5)
