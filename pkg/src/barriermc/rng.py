"""Reproducible random streams and samplers for the model's primitive laws.

Streams are Philox (counter-based) generators keyed by ``(master_seed, stream_id, *tags)``
through :class:`numpy.random.SeedSequence`, so a stream depends only on its key and never
on how work is scheduled across threads.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import KouJumpParams, ParameterError

_MASK64 = (1 << 64) - 1


class Purpose(enum.IntEnum):
    """Tags separating the streams consumed by different engines."""

    GRID = 1
    SKELETON = 2
    HIT_TIME = 3
    GAP = 4
    BESSEL = 5
    BESSEL_U = 6
    CHECK = 7
    MERGED = 8


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if int(v) != v or v < 0 or v > _MASK64:
                raise ParameterError(f"{name} must be an unsigned 64-bit integer, got {v}")

    def generator(self, *tags: int) -> np.random.Generator:
        return make_stream(self.master_seed, self.stream_id, *tags)


def make_stream(master_seed: int, stream_id: int = 0, *tags: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed) & _MASK64, spawn_key=(int(stream_id), *map(int, tags)))
    return np.random.Generator(np.random.Philox(ss))


def standard_normal(stream: np.random.Generator, size=None):
    return stream.standard_normal(size)


def sample_poisson(rate: float, stream: np.random.Generator, size=None):
    if rate < 0:
        raise ParameterError(f"Poisson rate must be non-negative, got {rate}")
    return stream.poisson(rate, size)


def sample_kou_jump(jumps: KouJumpParams, stream: np.random.Generator, size=None):
    """Inverse-CDF draw from the asymmetric double exponential law."""
    u = np.maximum(stream.random(size), np.finfo(float).tiny)
    q = jumps.q
    with np.errstate(divide="ignore", invalid="ignore"):
        down = np.log(u / q) / jumps.eta2 if q > 0 else np.zeros_like(u)
        up = -np.log((1.0 - u) / jumps.p) / jumps.eta1 if jumps.p > 0 else np.zeros_like(u)
    y = np.where(u < q, down, up)
    return float(y) if size is None else y


def sample_kou_sum(counts, jumps: KouJumpParams, stream: np.random.Generator):
    """Exact sum of ``counts[i]`` i.i.d. double-exponential jumps, vectorised.

    The number of upward jumps is binomial; a sum of ``k`` exponentials is Gamma(k).
    """
    counts = np.asarray(counts)
    n_up = stream.binomial(counts, jumps.p)
    n_down = counts - n_up
    up = stream.gamma(n_up, 1.0 / jumps.eta1) if jumps.p > 0 else 0.0
    down = stream.gamma(n_down, 1.0 / jumps.eta2) if jumps.p < 1 else 0.0
    return up - down


def conditional_jump_times(l: int, t: float, stream: np.random.Generator, size=None):
    """Jump times of a Poisson process on ``(0, t)`` given ``N_t = l``: sorted uniforms.

    With ``size`` the result has shape ``(size, l)``.
    """
    if l < 0 or t <= 0:
        raise ParameterError("need l >= 0 and t > 0")
    shape = (l,) if size is None else (size, l)
    return np.sort(stream.uniform(0.0, t, shape), axis=-1)
