"""Reproducible, splittable random draws.

Every random number used by the library is addressed by a triple
``(seed, stream, index)``. The triple maps to a Philox4x64-10 block:
key = (seed, stream), counter = index // 4, lane = index % 4. Because Philox
is counter-based, draw ``index`` can be produced without generating any of
the draws before it, so work can be split across threads (or machines) in any
way without changing a single value.

Uniforms in [0, 1) are ``(raw >> 11) * 2**-53``, the usual 53-bit mantissa
construction; ``raw >> 11`` is also exposed as an integer so discrete sampling
can compare against rational thresholds exactly.

Reference vector (Random123 known-answer test, key = counter = 0)::

    RandomStream(0, 0).raw(0, 4) ==
        [0x16554d9eca36314c, 0xdb20fe9d672d0fdc,
         0xd7e772cee186176b, 0x7e68b68aec7ba23b]
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from numpy.random import Philox

from gaugesim.core import (
    ContinuousDistribution,
    DiscreteDistribution,
    ParametricDistribution,
    reduce_angle,
)

DEFAULT_SEED = 20251015
SEED_ENV_VAR = "GAUGESIM_SEED"

_MASK64 = (1 << 64) - 1
_BITS = 53
_SCALE = 2.0**-_BITS

# stream ids, one per kind of experiment
STREAM_PAIRS = 1
STREAM_TRIPLE = 2
STREAM_CHANNEL = 3
STREAM_PROTOCOL = 4
STREAM_EXPECTATION = 5
STREAM_SAMPLES = 6


def seed_from_env(default: int = DEFAULT_SEED) -> int:
    text = os.environ.get(SEED_ENV_VAR)
    if text is None or not text.strip():
        return default
    return int(text.strip(), 0)


@dataclass(frozen=True)
class RandomStream:
    seed: int = DEFAULT_SEED
    stream: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0 <= int(self.stream) <= _MASK64:
            raise ValueError(f"stream id must be a 64-bit unsigned integer, got {self.stream}")

    def raw(self, start: int, count: int) -> np.ndarray:
        """64-bit draws ``start .. start+count-1`` of this stream."""
        if start < 0 or count < 0:
            raise ValueError("start and count must be non-negative")
        if count == 0:
            return np.zeros(0, dtype=np.uint64)
        block, lane = divmod(int(start), 4)
        nblocks = -(-(lane + int(count)) // 4)
        # numpy's Philox increments the counter before producing a block
        ctr = (block - 1) % (1 << 256)
        counter = np.array([(ctr >> (64 * i)) & _MASK64 for i in range(4)], dtype=np.uint64)
        key = np.array([int(self.seed), int(self.stream)], dtype=np.uint64)
        bits = Philox(key=key, counter=counter).random_raw(4 * nblocks)
        return bits[lane : lane + count]

    def ints53(self, start: int, count: int) -> np.ndarray:
        return (self.raw(start, count) >> np.uint64(64 - _BITS)).astype(np.int64)

    def uniforms(self, start: int, count: int) -> np.ndarray:
        return self.ints53(start, count).astype(np.float64) * _SCALE

    def substream(self, offset: int) -> "RandomStream":
        return RandomStream(self.seed, (int(self.stream) + int(offset)) & _MASK64)


def chunk_bounds(n: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(int(parts), max(n, 1)))
    edges = np.linspace(0, n, parts + 1).astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a] or [(0, 0)]


def run_chunked(fn: Callable[[int, int], object], n: int, threads: int = 1) -> list:
    """Evaluate ``fn(lo, hi)`` over a partition of ``range(n)``, in order.

    Results depend only on item indices, never on the partition, as long as
    ``fn`` draws from counter positions derived from item indices.
    """
    bounds = chunk_bounds(n, threads)
    if len(bounds) == 1:
        return [fn(*bounds[0])]
    with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


# ---------------------------------------------------------------------------
# outcome sampling


def discrete_thresholds(weights: Sequence[Fraction]) -> np.ndarray:
    """Integer thresholds t_i = ceil(C_i * 2**53) for cumulative masses C_i.

    For an integer draw r in [0, 2**53), ``r < t_i`` iff ``r / 2**53 < C_i``.
    """
    out = []
    acc = Fraction(0)
    for w in weights:
        acc += w
        q = acc * (1 << _BITS)
        out.append(math.ceil(q))
    return np.array(out, dtype=np.int64)


def discrete_from_ints(dist: DiscreteDistribution, r: np.ndarray) -> np.ndarray:
    return np.searchsorted(discrete_thresholds(dist.weights), r, side="right").astype(np.int64)


def sample_discrete(dist: DiscreteDistribution, stream: RandomStream, n: int, start: int = 0) -> np.ndarray:
    """``n`` outcome indices, one draw each (draws ``start .. start+n-1``)."""
    return discrete_from_ints(dist, stream.ints53(start, n))


def circle_inverse_cdf(u: float, v, w) -> np.ndarray:
    """Outcome with density ``|cos(lam - u)| / 4`` from uniforms ``v`` and ``w``.

    ``theta = arcsin(2v - 1)`` has density ``cos(theta) / 2`` on [-pi/2, pi/2];
    ``w < 1/2`` mirrors it to the opposite half-circle.
    """
    v = np.asarray(v, dtype=float)
    theta = np.arcsin(2.0 * v - 1.0)
    theta = np.where(np.asarray(w) < 0.5, theta + np.pi, theta)
    return reduce_angle(u + theta)


def continuous_from_uniforms(dist: ContinuousDistribution, v, w, c=None) -> np.ndarray:
    """Sample a mixture; ``c`` picks the component and is needed only for mixtures."""
    comps = dist.components
    if len(comps) == 1:
        return dist.family.inverse_cdf(comps[0][1], v, w)
    if c is None:
        raise ValueError("mixture sampling needs a component uniform")
    edges = np.cumsum([wt for wt, _ in comps])
    pick = np.minimum(np.searchsorted(edges, c, side="right"), len(comps) - 1)
    out = np.empty(np.shape(v), dtype=float)
    for k, (_, u) in enumerate(comps):
        sel = pick == k
        out[sel] = dist.family.inverse_cdf(u, np.asarray(v)[sel], np.asarray(w)[sel])
    return out


def draws_per_sample(dist: ParametricDistribution) -> int:
    if isinstance(dist, DiscreteDistribution):
        return 1
    return 2 if len(dist.components) == 1 else 3


def sample_circle(u: float, stream: RandomStream, n: int, start: int = 0) -> np.ndarray:
    """``n`` draws from ``|cos(lam - u)| / 4``, two uniforms per sample."""
    uni = stream.uniforms(2 * start, 2 * n).reshape(n, 2)
    return circle_inverse_cdf(reduce_angle(u), uni[:, 0], uni[:, 1])


def sample_outcomes(
    dist: ParametricDistribution, stream: RandomStream, n: int, start: int = 0, threads: int = 1
) -> np.ndarray:
    """Sample item ``start .. start+n-1``; item i uses draws [k*i, k*i + k)."""
    k = draws_per_sample(dist)

    def work(lo, hi):
        if isinstance(dist, DiscreteDistribution):
            return discrete_from_ints(dist, stream.ints53(start + lo, hi - lo))
        uni = stream.uniforms(k * (start + lo), k * (hi - lo)).reshape(hi - lo, k)
        c = uni[:, 2] if k == 3 else None
        return continuous_from_uniforms(dist, uni[:, 0], uni[:, 1], c)

    return np.concatenate(run_chunked(work, n, threads))
