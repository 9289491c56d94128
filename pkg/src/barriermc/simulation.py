"""Exact path simulation on monitoring grids and on jump-time skeletons.

Nothing here discretises the SDE: grid increments are exact draws of ``X_{t+dt} - X_t``,
and the continuous extremes between skeleton events come from the Brownian-bridge
maximum/minimum laws given the segment endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import JumpDiffusionParams, ParameterError
from .rng import sample_kou_jump, sample_kou_sum


def sample_increment(model: JumpDiffusionParams, dt: float, stream: np.random.Generator, size=None):
    """Exact draw of ``X_{t+dt} - X_t``: Gaussian part plus a compound-Poisson jump sum."""
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    z = stream.standard_normal(size)
    inc = model.gamma * dt + model.sigma * np.sqrt(dt) * z
    if model.lam > 0:
        counts = stream.poisson(model.lam * dt, size)
        inc = inc + sample_kou_sum(counts, model.jumps, stream)
    return float(inc) if size is None else inc


def iter_grid_steps(model: JumpDiffusionParams, T: float, n: int, size: int, stream: np.random.Generator):
    """Yield ``X_{kT/n}`` for ``k = 1..n`` across ``size`` independent paths."""
    if n < 1 or not T > 0:
        raise ParameterError("need n >= 1 and T > 0")
    dt = T / n
    x = np.zeros(size)
    for _ in range(n):
        x = x + sample_increment(model, dt, stream, size)
        yield x


def simulate_grid_batch(model: JumpDiffusionParams, T: float, n: int, size: int, stream) -> np.ndarray:
    """Full grid paths, shape ``(size, n + 1)`` with a leading column of zeros."""
    out = np.zeros((size, n + 1))
    for k, x in enumerate(iter_grid_steps(model, T, n, size, stream), start=1):
        out[:, k] = x
    return out


@dataclass(frozen=True)
class GridPath:
    n: int
    times: np.ndarray
    x: np.ndarray

    @property
    def max(self) -> float:
        return float(self.x.max())

    @property
    def min(self) -> float:
        return float(self.x.min())

    @property
    def terminal(self) -> float:
        return float(self.x[-1])


def simulate_grid_path(model: JumpDiffusionParams, T: float, n: int, stream) -> GridPath:
    x = simulate_grid_batch(model, T, n, 1, stream)[0]
    return GridPath(n=n, times=np.linspace(0.0, T, n + 1), x=x)


def grid_extremes(model: JumpDiffusionParams, T: float, n: int, size: int, stream):
    """Terminal value and running discrete max/min, computed online.

    Consumes the stream exactly like :func:`simulate_grid_batch`.
    """
    hi = np.zeros(size)
    lo = np.zeros(size)
    x = hi
    for x in iter_grid_steps(model, T, n, size, stream):
        np.maximum(hi, x, out=hi)
        np.minimum(lo, x, out=lo)
    return x, hi, lo


# --- Brownian bridge identities -------------------------------------------------

def bridge_cross_prob(x_start, x_end, dt, sigma, h):
    """P(sup of a Brownian bridge from ``x_start`` to ``x_end`` over ``dt`` reaches ``h``).

    ``exp(-2 (h - x_start)(h - x_end) / (sigma^2 dt))`` below the barrier, 1 otherwise.
    Drift does not enter once both endpoints are fixed.
    """
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0):
        raise ParameterError("dt must be positive")
    x_start = np.asarray(x_start, dtype=float)
    x_end = np.asarray(x_end, dtype=float)
    below = (x_start < h) & (x_end < h)
    expo = -2.0 * (h - x_start) * (h - x_end) / (sigma**2 * dt)
    p = np.where(below, np.exp(np.where(below, expo, 0.0)), 1.0)
    return p[()] if p.ndim == 0 else p


def bridge_max_from_uniform(a, b, dt, sigma, u):
    """Maximum of the bridge from ``a`` to ``b`` by inversion; ``u`` uniform on (0, 1]."""
    return 0.5 * (a + b + np.sqrt((b - a) ** 2 - 2.0 * sigma**2 * dt * np.log(u)))


def bridge_min_from_uniform(a, b, dt, sigma, u):
    return 0.5 * (a + b - np.sqrt((b - a) ** 2 - 2.0 * sigma**2 * dt * np.log(u)))


def bridge_hit_time(a, b, h, dt, sigma, stream):
    """Time (from segment start) at which a bridge from ``a < h`` to ``b`` first touches ``h``,
    conditional on touching.

    With ``alpha = h - a`` and ``beta = |h - b|`` the ratio ``v = tau/(dt - tau)`` is
    inverse Gaussian with mean ``alpha/beta`` and shape ``alpha^2/(sigma^2 dt)``.
    """
    a = np.asarray(a, dtype=float)
    alpha = h - a
    beta = np.maximum(np.abs(h - np.asarray(b, dtype=float)), 1e-300)
    v = stream.wald(alpha / beta, alpha**2 / (sigma**2 * dt))
    return dt * v / (1.0 + v)


def _uniform01(stream, shape):
    # (0, 1]: keeps log() finite in the extreme samplers
    return 1.0 - stream.random(shape)


# --- jump skeletons -------------------------------------------------------------

@dataclass(frozen=True)
class PathSkeleton:
    """Event times ``0 = t_0 < T_1 < ... < T_l < T`` with left-limit and post-jump values."""

    times: np.ndarray
    pre: np.ndarray
    post: np.ndarray
    T: float

    @property
    def n_jumps(self) -> int:
        return len(self.times) - 2

    @property
    def jump_sizes(self) -> np.ndarray:
        return (self.post - self.pre)[1:-1]

    @property
    def terminal(self) -> float:
        return float(self.post[-1])


@dataclass
class SkeletonBatch:
    """Padded batch of event skeletons (grid dates merged with jump times).

    Rows are paths. Column 0 is time 0; padding events sit at ``T`` with zero-length
    segments and zero jumps, so they never change any functional.
    ``seg_max[:, i]`` / ``seg_min[:, i]`` are exact bridge extremes on the segment
    from event ``i`` to event ``i + 1``.
    """

    times: np.ndarray
    pre: np.ndarray
    post: np.ndarray
    on_grid: np.ndarray
    seg_max: np.ndarray
    seg_min: np.ndarray
    n_jumps: np.ndarray
    sigma: float

    @property
    def terminal(self) -> np.ndarray:
        return self.post[:, -1]

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times, axis=1)

    def continuous_max(self) -> np.ndarray:
        return self.seg_max.max(axis=1)

    def continuous_min(self) -> np.ndarray:
        return self.seg_min.min(axis=1)

    def discrete_max(self) -> np.ndarray:
        return np.where(self.on_grid, self.post, -np.inf).max(axis=1)

    def discrete_min(self) -> np.ndarray:
        return np.where(self.on_grid, self.post, np.inf).min(axis=1)

    def grid_values(self) -> np.ndarray:
        """Values at the grid dates, shape ``(paths, n + 1)``."""
        B = self.post.shape[0]
        return self.post[self.on_grid].reshape(B, -1)

    def grid_times(self) -> np.ndarray:
        B = self.times.shape[0]
        return self.times[self.on_grid].reshape(B, -1)

    def first_passage(self, h: float, up: bool, stream) -> tuple[np.ndarray, np.ndarray]:
        """Continuous breach indicator and breach time of level ``h``.

        Times are exact in law: jumps over the level use the jump time, diffusive
        crossings are drawn from the conditional bridge hitting-time law.
        """
        sgn = 1.0 if up else -1.0
        ext = self.seg_max if up else -self.seg_min
        crossed = ext >= sgn * h
        hit = crossed.any(axis=1)
        tau = np.full(hit.shape, np.inf)
        rows = np.nonzero(hit)[0]
        if rows.size:
            seg = crossed[rows].argmax(axis=1)
            a = sgn * self.post[rows, seg]
            b = sgn * self.pre[rows, seg + 1]
            t0 = self.times[rows, seg]
            dt = self.times[rows, seg + 1] - t0
            at_start = a >= sgn * h
            inner = np.nonzero(~at_start)[0]
            offs = np.zeros(rows.size)
            if inner.size:
                offs[inner] = bridge_hit_time(a[inner], b[inner], sgn * h, dt[inner], self.sigma, stream)
            tau[rows] = t0 + offs
        return hit, tau

    def discrete_first_passage(self, h: float, up: bool) -> tuple[np.ndarray, np.ndarray]:
        vals = self.grid_values()
        times = self.grid_times()
        crossed = vals >= h if up else vals <= h
        hit = crossed.any(axis=1)
        idx = crossed.argmax(axis=1)
        tau = np.where(hit, times[np.arange(len(idx)), idx], np.inf)
        return hit, tau


def simulate_skeleton_batch(
    model: JumpDiffusionParams,
    T: float,
    size: int,
    stream: np.random.Generator,
    grid_n: int | None = None,
) -> SkeletonBatch:
    """Simulate ``size`` skeletons; with ``grid_n`` the dates ``kT/grid_n`` are merged in.

    Jump times use the order-statistics construction given ``N_T``.
    """
    if not T > 0:
        raise ParameterError(f"T must be positive, got {T}")
    counts = stream.poisson(model.lam * T, size) if model.lam > 0 else np.zeros(size, dtype=np.int64)
    L = int(counts.max()) if size else 0
    real = np.arange(L)[None, :] < counts[:, None]
    jt = np.where(real, stream.uniform(0.0, T, (size, L)), T)
    jt.sort(axis=1)
    jy = np.where(real, sample_kou_jump(model.jumps, stream, (size, L)), 0.0) if L else np.zeros((size, 0))
    # padding (time T) sorts after the real times, so slot i < count stays a real jump
    grid = np.linspace(0.0, T, (grid_n or 1) + 1)
    G = grid.size
    times = np.concatenate([np.broadcast_to(grid, (size, G)), jt], axis=1)
    sizes = np.concatenate([np.zeros((size, G)), jy], axis=1)
    on_grid = np.zeros(times.shape, dtype=bool)
    on_grid[:, :G] = True
    order = np.argsort(times, axis=1, kind="stable")
    times = np.take_along_axis(times, order, axis=1)
    sizes = np.take_along_axis(sizes, order, axis=1)
    on_grid = np.take_along_axis(on_grid, order, axis=1)

    dt = np.diff(times, axis=1)
    z = stream.standard_normal(dt.shape)
    diff_inc = model.gamma * dt + model.sigma * np.sqrt(dt) * z
    E = times.shape[1]
    pre = np.zeros((size, E))
    post = np.zeros((size, E))
    # post[i] = post[i-1] + diffusion + jump; pre[i] is the left limit
    cum = np.cumsum(diff_inc + sizes[:, 1:], axis=1)
    post[:, 1:] = cum
    pre[:, 1:] = cum - sizes[:, 1:]
    u_max = _uniform01(stream, dt.shape)
    u_min = _uniform01(stream, dt.shape)
    a = post[:, :-1]
    b = pre[:, 1:]
    seg_max = bridge_max_from_uniform(a, b, dt, model.sigma, u_max)
    seg_min = bridge_min_from_uniform(a, b, dt, model.sigma, u_min)
    return SkeletonBatch(times, pre, post, on_grid, seg_max, seg_min, counts, model.sigma)


def simulate_jump_skeleton(model: JumpDiffusionParams, T: float, stream) -> PathSkeleton:
    batch = simulate_skeleton_batch(model, T, 1, stream)
    n = int(batch.n_jumps[0])
    # events: time 0, the n real jumps, then maturity; padding follows
    idx = np.arange(n + 2)
    return PathSkeleton(
        times=batch.times[0, idx].copy(),
        pre=batch.pre[0, idx].copy(),
        post=batch.post[0, idx].copy(),
        T=T,
    )


def continuous_max_indicator(skeleton: PathSkeleton, h: float, sigma: float, stream) -> bool:
    """``1{sup_t X_t >= h}`` on one skeleton: event values first, then one bridge test per segment."""
    if np.any(skeleton.pre >= h) or np.any(skeleton.post >= h):
        return True
    a = skeleton.post[:-1]
    b = skeleton.pre[1:]
    dt = np.diff(skeleton.times)
    live = dt > 0
    u = stream.random(a.shape)
    p = bridge_cross_prob(a[live], b[live], dt[live], sigma, h)
    return bool(np.any(u[live] < p))
