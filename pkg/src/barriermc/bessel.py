"""Three-dimensional Bessel process kernels and the correction constant beta1.

``beta1 = E[min_{j in Z} R(U + j)]`` where ``R`` is a two-sided 3-d Bessel process
started at 0 and ``U ~ Uniform(0, 1)`` is independent of it.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .model import ParameterError
from .rng import Purpose, make_stream

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
CACHE_ENV = "BARRIERMC_CACHE_DIR"
CACHE_FILE = "beta1.json"

DEFAULT_J = 20
DEFAULT_GRID_STEP = 2.0**-6
DEFAULT_SAMPLES = 1_000_000
DEFAULT_SEED = 20240601
BLOCK = 1 << 15


def _gauss(t, x):
    return np.exp(-(x * x) / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)


def bessel_transition_density(t, x, y):
    """Transition density ``q~_t(x, y) = q_t(x, y) * y / x`` of the 3-d Bessel process.

    ``q_t`` is the killed-at-0 Brownian density ``g_t(x-y) - g_t(x+y)``. Written as
    ``y g_t(x-y) (1 - exp(-2xy/t)) / x`` so the ``x -> 0`` limit is continuous.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ParameterError("t must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ParameterError("Bessel states are non-negative")
    xs = np.where(x > 0, x, 1.0)
    ratio = np.where(x > 0, -np.expm1(-2.0 * xs * y / t) / xs, 2.0 * y / t)
    out = y * _gauss(t, x - y) * ratio
    return out[()] if out.ndim == 0 else out


def bessel_bar_density(t, r, m):
    """``q-_t(r, m) = q~_t(r, m) / m``; at ``r = 0`` equals ``sqrt(2/pi) m t^{-3/2} exp(-m^2/2t)``."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    m = np.asarray(m, dtype=float)
    rs = np.where(r > 0, r, 1.0)
    ratio = np.where(r > 0, -np.expm1(-2.0 * rs * m / t) / rs, 2.0 * m / t)
    out = _gauss(t, r - m) * ratio
    return out[()] if out.ndim == 0 else out


def max_argmax_density(s, m):
    """``u(s, m) = m s^{-3/2} exp(-m^2/(2s)) / sqrt(pi)``.

    The (argmax, max) pair of a standard Brownian bridge from ``x`` to ``y`` on
    ``[0, 1]`` has density ``u(s, m - x) u(1 - s, m - y) / n(y - x)``; see
    :func:`bridge_max_argmax_density`.
    """
    s = np.asarray(s, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(s <= 0) or np.any(m <= 0):
        raise ParameterError("u(s, m) needs s > 0 and m > 0")
    out = m / s**1.5 * np.exp(-(m * m) / (2.0 * s)) / math.sqrt(math.pi)
    return out[()] if out.ndim == 0 else out


def bridge_max_argmax_density(s, m, x, y):
    """Joint density of (argmax, max) for the unit-variance bridge from ``x`` to ``y`` over [0, 1]."""
    s = np.asarray(s, dtype=float)
    m = np.asarray(m, dtype=float)
    ok = (s > 0) & (s < 1) & (m > x) & (m > y)
    ss = np.where(ok, s, 0.5)
    m1 = np.where(ok, m - x, 1.0)
    m2 = np.where(ok, m - y, 1.0)
    val = max_argmax_density(ss, m1) * max_argmax_density(1.0 - ss, m2) / _gauss(1.0, y - x)
    out = np.where(ok, val, 0.0)
    return out[()] if out.ndim == 0 else out


def _check_bridge_args(t1, t2, y, m):
    if not 0 < t1 < t2:
        raise ParameterError("need 0 < t1 < t2")
    if np.any(np.asarray(y) <= 0) or np.any(np.asarray(m) <= 0):
        raise ParameterError("bridge endpoints must be positive")


def bessel_bridge_min_cdf(t1, t2, y, m, b):
    """P(min of the Bessel bridge on [t1, t2] <= b | R(t1) = y, R(t2) = m).

    ``(exp(2(b-y)(m-b)/T) - exp(-2ym/T)) / (1 - exp(-2ym/T))`` with ``T = t2 - t1``,
    equal to 1 once ``b >= min(y, m)``. Evaluated as
    ``exp(-2(y-b)(m-b)/T) * expm1(-2b(m+y-b)/T) / expm1(-2ym/T)`` to avoid overflow.
    """
    _check_bridge_args(t1, t2, y, m)
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise ParameterError("level b must be non-negative")
    T = t2 - t1
    y = np.asarray(y, dtype=float)
    m = np.asarray(m, dtype=float)
    inside = b < np.minimum(y, m)
    bb = np.where(inside, b, 0.0)
    val = np.exp(-2.0 * (y - bb) * (m - bb) / T) * np.expm1(-2.0 * bb * (m + y - bb) / T) / np.expm1(-2.0 * y * m / T)
    out = np.where(inside, val, 1.0)
    return out[()] if out.ndim == 0 else out


def bessel_bridge_min_bound(y, m, b):
    """Upper bound ``b (m + y) / (y m)`` for the bridge-minimum CDF."""
    return b * (m + y) / (y * m)


def bessel_bridge_min_quantile(t1, t2, y, m, p):
    """Inverse of :func:`bessel_bridge_min_cdf` in ``b``.

    The CDF equals ``expm1(2b(m+y-b)/T) / expm1(2ym/T)``, so the quantile solves the
    quadratic ``b^2 - (m+y) b + (T/2) log(1 + p expm1(2ym/T)) = 0`` (smaller root).
    """
    _check_bridge_args(t1, t2, y, m)
    T = t2 - t1
    y = np.asarray(y, dtype=float)
    m = np.asarray(m, dtype=float)
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    z = 2.0 * y * m / T
    # log(1 + p (e^z - 1)) without overflow for large z
    with np.errstate(divide="ignore"):
        logc = np.where(
            z < 30.0,
            np.log1p(p * np.expm1(np.minimum(z, 30.0))),
            z + np.log(p + (1.0 - p) * np.exp(-z)),
        )
    s = m + y
    disc = np.maximum(s * s - 2.0 * T * logc, 0.0)
    # (s - sqrt(disc))/2 rewritten to avoid cancellation
    out = T * logc / (s + np.sqrt(disc))
    out = np.minimum(out, np.minimum(y, m))
    return out[()] if out.ndim == 0 else out


def sample_bessel_bridge_min(t1, t2, y, m, stream, size=None):
    """Draw the minimum of a 3-d Bessel bridge by exact inversion of its CDF."""
    u = stream.random(size)
    return bessel_bridge_min_quantile(t1, t2, y, m, u)


@dataclass(frozen=True)
class TwoSidedBesselPath:
    times: np.ndarray
    values: np.ndarray


def simulate_two_sided_bessel(J: int, grid_step: float, stream) -> TwoSidedBesselPath:
    """Two-sided 3-d Bessel path on the grid of step ``grid_step`` covering ``[-J-1, J+1]``.

    Each side is the Euclidean norm of an independent standard 3-d Brownian motion,
    so the grid values are exact.
    """
    if J < 0 or not grid_step > 0:
        raise ParameterError("need J >= 0 and grid_step > 0")
    k = int(math.ceil((J + 1) / grid_step))
    t = np.arange(k + 1) * grid_step
    sides = []
    for _ in range(2):
        inc = stream.standard_normal((k, 3)) * math.sqrt(grid_step)
        w = np.vstack([np.zeros((1, 3)), np.cumsum(inc, axis=0)])
        sides.append(np.linalg.norm(w, axis=1))
    right, left = sides
    times = np.concatenate([-t[:0:-1], t])
    values = np.concatenate([left[:0:-1], right])
    return TwoSidedBesselPath(times, values)


def _radial_step(r, dt, stream):
    """3-d Bessel transition: ``|r e_1 + sqrt(dt) N_3|``."""
    z = stream.standard_normal((r.size, 3)) * np.sqrt(dt)[:, None]
    z[:, 0] += r
    return np.linalg.norm(z, axis=1)


def complete_lattice_tail(r_right, r_left, current_min, stream) -> np.ndarray:
    """Extend a truncated lattice minimum to all ``j`` in Z, exactly in law.

    From lattice state ``r > m`` the continuous Bessel path ever goes below the
    running minimum ``m`` with probability ``m / r``; otherwise no later lattice
    point can lower the minimum. Conditioned on reaching ``m`` the path is a plain
    Brownian motion until it does, so the hitting delay is ``(r - m)^2 / Z^2``;
    afterwards it restarts as a Bessel process from ``m`` and the next lattice point
    lies ``ceil(delay) - delay`` later. Each side is run until it stops.
    """
    m = np.array(current_min, dtype=float)
    for r0 in (r_right, r_left):
        r = np.array(r0, dtype=float)
        active = np.ones(r.shape, dtype=bool)
        while active.any():
            idx = np.nonzero(active)[0]
            ri, mi = r[idx], m[idx]
            at_min = ri <= mi
            go = at_min | (stream.random(idx.size) * ri < mi)
            active[idx[~go]] = False
            idx, ri, mi, at_min = idx[go], ri[go], mi[go], at_min[go]
            if not idx.size:
                break
            delay = (ri - mi) ** 2 / stream.standard_normal(idx.size) ** 2
            frac = np.ceil(delay) - delay
            start = np.where(at_min, ri, mi)
            dt = np.where(at_min, 1.0, frac)
            nxt = _radial_step(start, dt, stream)
            r[idx] = nxt
            m[idx] = np.minimum(mi, nxt)
    return m


def _lattice_min_block(J: int, size: int, seed: int, block: int, complete_tail: bool = False) -> np.ndarray:
    """``min_{|j| <= J} R(U + j)`` for one block of samples (all ``j`` with ``complete_tail``).

    R is only needed at the lattice ``U + j``: the right side at times ``U, U+1, ..``
    and the left side at ``1-U, 2-U, ..``. Each lag draws from its own stream, so a
    larger window reuses the draws of a smaller one (common random numbers).
    """
    u = make_stream(seed, block, Purpose.BESSEL_U).random(size)
    w = make_stream(seed, block, Purpose.BESSEL, 0, 0).standard_normal((size, 3)) * np.sqrt(u)[:, None]
    right = np.linalg.norm(w, axis=1)
    best = right
    left = None
    v = None
    for j in range(1, J + 1):
        w = w + make_stream(seed, block, Purpose.BESSEL, 0, j).standard_normal((size, 3))
        right = np.linalg.norm(w, axis=1)
        best = np.minimum(best, right)
        dv = make_stream(seed, block, Purpose.BESSEL, 1, j).standard_normal((size, 3))
        v = dv * np.sqrt(1.0 - u)[:, None] if v is None else v + dv
        left = np.linalg.norm(v, axis=1)
        best = np.minimum(best, left)
    if complete_tail:
        if left is None:
            # J = 0: the first left point 1 - U is reached through the tail rule from 0
            left = np.zeros(size)
            left_first = _radial_step(left, 1.0 - u, make_stream(seed, block, Purpose.BESSEL, 1, 0))
            best = np.minimum(best, left_first)
            left = left_first
        best = complete_lattice_tail(right, left, best, make_stream(seed, block, Purpose.BESSEL, 2, J))
    return best


def sample_lattice_minimum(
    J: int, n_samples: int, seed: int, threads: int = 1, complete_tail: bool = False
) -> np.ndarray:
    """Samples of ``R_J = min_{|j| <= J} R(U + j)``.

    With ``complete_tail`` the lattice beyond ``|j| = J`` is accounted for exactly and
    the samples follow the law of the untruncated minimum ``R`` for every ``J``.
    The truncated version converges slowly (bias of order ``J^{-1/2}``).
    """
    if J < 0 or n_samples < 1:
        raise ParameterError("need J >= 0 and n_samples >= 1")
    sizes = [min(BLOCK, n_samples - i) for i in range(0, n_samples, BLOCK)]
    jobs = [(J, s, seed, b, complete_tail) for b, s in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda a: _lattice_min_block(*a), jobs))
    else:
        parts = [_lattice_min_block(*a) for a in jobs]
    return np.concatenate(parts)


@dataclass(frozen=True)
class BesselBetaEstimate:
    value: float
    stderr: float
    n_samples: int
    J: int
    grid_step: float
    seed: int
    tail_completed: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BesselBetaEstimate":
        return cls(
            value=float(d["value"]),
            stderr=float(d["stderr"]),
            n_samples=int(d["n_samples"]),
            J=int(d["J"]),
            grid_step=float(d["grid_step"]),
            seed=int(d["seed"]),
            tail_completed=bool(d.get("tail_completed", True)),
        )

    @classmethod
    def pinned(cls, value: float) -> "BesselBetaEstimate":
        """A user-supplied constant with no Monte Carlo provenance."""
        return cls(value=float(value), stderr=0.0, n_samples=0, J=0, grid_step=0.0, seed=0, tail_completed=False)


def estimate_beta1(
    J: int = DEFAULT_J,
    grid_step: float = DEFAULT_GRID_STEP,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
    complete_tail: bool = True,
) -> BesselBetaEstimate:
    """Monte Carlo estimate of ``beta1 = E R``.

    Lags ``|j| <= J`` are simulated directly; with ``complete_tail`` (default) the
    remaining lags are handled by :func:`complete_lattice_tail`, so the estimate is
    unbiased for every ``J``. Without it the window truncation biases the result
    upwards by roughly ``0.07 / sqrt(J)``. The lattice values are exact, so
    ``grid_step`` does not influence the estimate and is recorded for provenance.
    """
    if not grid_step > 0:
        raise ParameterError("grid_step must be positive")
    r = sample_lattice_minimum(J, n_samples, seed, threads, complete_tail)
    sd = float(r.std(ddof=1)) if n_samples > 1 else float("nan")
    return BesselBetaEstimate(
        value=math.fsum(r) / n_samples,
        stderr=sd / math.sqrt(n_samples),
        n_samples=n_samples,
        J=J,
        grid_step=grid_step,
        seed=seed,
        tail_completed=complete_tail,
    )


def cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "barriermc"))


def save_beta1(est: BesselBetaEstimate, path: Path | None = None) -> Path:
    path = Path(path) if path is not None else cache_dir() / CACHE_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(est.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def load_beta1(path: Path | None = None) -> BesselBetaEstimate | None:
    path = Path(path) if path is not None else cache_dir() / CACHE_FILE
    if not path.exists():
        return None
    return BesselBetaEstimate.from_dict(json.loads(path.read_text()))


def cached_beta1(path: Path | None = None, threads: int = 1) -> BesselBetaEstimate:
    """Load the cached constant, computing and storing it with default settings on first use."""
    est = load_beta1(path)
    if est is None:
        est = estimate_beta1(threads=threads)
        save_beta1(est, path)
    return est
