"""Monte Carlo pricers for discretely and continuously monitored barrier options.

Paths are simulated in fixed-size blocks; block ``b`` always draws from the stream keyed
by ``(seed, b, purpose)``. Results therefore depend on the seed and the path count only,
never on the number of worker threads.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .model import (
    BarrierOptionSpec,
    Direction,
    JumpDiffusionParams,
    Knock,
    KouJumpParams,
    MonitoringScheme,
    OptionKind,
    ParameterError,
    RebateConvention,
    barrier_reached,
    kou_exp_moment,
    vanilla_payoff,
)
from .rng import Purpose, make_stream, sample_kou_sum
from .simulation import (
    bridge_max_from_uniform,
    iter_grid_steps,
    sample_increment,
    simulate_skeleton_batch,
)

BLOCK = 1 << 14
MERGED_BLOCK = 1 << 12


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_paths: int
    master_seed: int
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        return self.mean - z * self.stderr, self.mean + z * self.stderr

    def to_dict(self) -> dict:
        return {"estimate": self.mean, "stderr": self.stderr, "n_paths": self.n_paths, "seed": self.master_seed}


def _block_sizes(n_paths: int, block: int) -> list[int]:
    if n_paths < 1:
        raise ParameterError(f"n_paths must be >= 1, got {n_paths}")
    return [min(block, n_paths - i) for i in range(0, n_paths, block)]


def run_blocks(fn, n_paths: int, block: int = BLOCK, threads: int = 1) -> np.ndarray:
    """Evaluate ``fn(block_index, size)`` over all blocks and concatenate in block order."""
    sizes = _block_sizes(n_paths, block)
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(fn, range(len(sizes)), sizes))
    else:
        parts = [fn(b, s) for b, s in enumerate(sizes)]
    return np.concatenate(parts, axis=0)


def summarize(samples: np.ndarray, seed: int, t0: float | None = None, **extra) -> MCEstimate:
    n = samples.shape[0]
    mean = math.fsum(samples) / n
    sd = float(np.std(samples, ddof=1)) if n > 1 else 0.0
    wall = time.perf_counter() - t0 if t0 is not None else 0.0
    return MCEstimate(mean, sd / math.sqrt(n), n, seed, wall, dict(extra))


def discounted_cashflows(
    spec: BarrierOptionSpec,
    r: float,
    terminal: np.ndarray,
    reached: np.ndarray,
    hit_time: np.ndarray,
    convention: RebateConvention,
) -> np.ndarray:
    """Discounted payoff per path from the knock indicator and (for Out options) the breach time."""
    T = spec.maturity
    alive = ~reached if spec.is_out else reached
    option_leg = np.exp(-r * T) * np.where(alive, vanilla_payoff(spec, terminal), 0.0)
    if spec.rebate == 0:
        return option_leg
    convention = RebateConvention(convention)
    if convention is RebateConvention.HIT_UNDISCOUNTED:
        disc = np.ones_like(terminal)
    elif convention is RebateConvention.HIT and spec.is_out:
        disc = np.exp(-r * np.where(reached, hit_time, T))
    else:
        disc = np.full_like(terminal, math.exp(-r * T))
    return option_leg + np.where(alive, 0.0, spec.rebate * disc)


def _discrete_block(model, spec, n, seed, convention, purpose=Purpose.GRID):
    T = spec.maturity
    dt = T / n

    def block(b, size):
        stream = make_stream(seed, b, purpose)
        reached = np.broadcast_to(barrier_reached(spec, 0.0), (size,)).copy()
        tau = np.where(reached, 0.0, np.inf)
        x = np.zeros(size)
        for k, x in enumerate(iter_grid_steps(model, T, n, size, stream), start=1):
            now = barrier_reached(spec, x) & ~reached
            tau[now] = k * dt
            reached |= now
        return discounted_cashflows(spec, model.r, x, reached, tau, convention)

    return block


def price_discrete(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    n: int,
    n_paths: int,
    seed: int,
    convention: RebateConvention = RebateConvention.HIT,
    threads: int = 1,
) -> MCEstimate:
    """Barrier price with monitoring at ``kT/n``, ``k = 0..n``, from exact grid increments."""
    MonitoringScheme.discrete(n)
    t0 = time.perf_counter()
    samples = run_blocks(_discrete_block(model, spec, n, seed, convention), n_paths, BLOCK, threads)
    return summarize(samples, seed, t0, n=n, barrier=spec.barrier)


def _continuous_block(model, spec, seed, convention):
    T = spec.maturity

    def block(b, size):
        skel = simulate_skeleton_batch(model, T, size, make_stream(seed, b, Purpose.SKELETON))
        reached, tau = skel.first_passage(spec.h, spec.is_up, make_stream(seed, b, Purpose.HIT_TIME))
        # the skeleton test is on log-levels; align the boundary with the payoff convention
        ext = skel.continuous_max() if spec.is_up else skel.continuous_min()
        reached = reached | barrier_reached(spec, ext)
        tau = np.where(np.isfinite(tau), tau, T)
        return discounted_cashflows(spec, model.r, skel.terminal, reached, tau, convention)

    return block


def price_continuous(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    n_paths: int,
    seed: int,
    convention: RebateConvention = RebateConvention.HIT,
    threads: int = 1,
) -> MCEstimate:
    """Continuously monitored price: breaches detected exactly on jump skeletons via bridge extremes."""
    t0 = time.perf_counter()
    samples = run_blocks(_continuous_block(model, spec, seed, convention), n_paths, BLOCK, threads)
    return summarize(samples, seed, t0, barrier=spec.barrier)


def price(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    monitoring: MonitoringScheme,
    n_paths: int,
    seed: int,
    convention: RebateConvention = RebateConvention.HIT,
    threads: int = 1,
) -> MCEstimate:
    if monitoring.is_continuous:
        return price_continuous(model, spec, n_paths, seed, convention, threads)
    return price_discrete(model, spec, monitoring.n, n_paths, seed, convention, threads)


def share_measure_model(model: JumpDiffusionParams) -> JumpDiffusionParams:
    """Dynamics of ``X`` under the share measure ``dPbar/dP = exp(X_T - (r - delta) T)``.

    The drift becomes ``gamma + sigma^2`` and the Levy measure ``e^y nu(dy)``: jump rate
    ``lam E[e^Y]``, decay rates ``eta1 - 1`` and ``eta2 + 1``, tilted up-probability.
    """
    j = model.jumps
    target = model.gamma + model.sigma**2
    if model.lam == 0:
        base = JumpDiffusionParams(model.r, model.delta, model.sigma, 0.0, j)
        return base.perturbed(target - base.gamma)
    if j.p > 0 and not j.eta1 > 2.0:
        raise ParameterError("share-measure simulation needs eta1 > 2")
    m = kou_exp_moment(j)
    p_bar = j.p * j.eta1 / (j.eta1 - 1.0) / m if j.p > 0 else 0.0
    tilted = KouJumpParams(p_bar, j.eta1 - 1.0 if j.p > 0 else j.eta1, j.eta2 + 1.0)
    base = JumpDiffusionParams(model.r, model.delta, model.sigma, model.lam * m, tilted)
    return base.perturbed(target - base.gamma)


def price_uoc_measure_change(
    model: JumpDiffusionParams,
    K: float,
    H: float,
    T: float,
    n_paths: int,
    seed: int,
    monitoring: MonitoringScheme = MonitoringScheme.continuous(),
    spot: float = 100.0,
    route: str = "weighting",
    threads: int = 1,
) -> MCEstimate:
    """Up-and-out call through ``S0 e^{-delta T} Pbar[A] - K e^{-rT} P[A]``, ``A = {M < h, X_T > k}``.

    ``route="weighting"`` estimates ``Pbar`` on the risk-neutral paths with weights
    ``exp(X_T - (r - delta) T)``; ``route="share"`` simulates ``Pbar`` directly under
    the share-measure dynamics from a separate stream, giving an independent estimator.
    """
    spec = BarrierOptionSpec(OptionKind.CALL, Direction.UP, Knock.OUT, K, H, 0.0, T, spot)
    k, h = spec.k, spec.h
    carry = model.r - model.delta

    def events(mdl, purpose):
        def block(b, size):
            if monitoring.is_continuous:
                skel = simulate_skeleton_batch(mdl, T, size, make_stream(seed, b, purpose))
                xt, mx = skel.terminal, skel.continuous_max()
            else:
                stream = make_stream(seed, b, purpose)
                mx = np.zeros(size)
                xt = mx
                for xt in iter_grid_steps(mdl, T, monitoring.n, size, stream):
                    mx = np.maximum(mx, xt)
            ind = (~barrier_reached(spec, mx)) & (xt > k)
            return np.column_stack([ind.astype(float), np.exp(xt - carry * T)])

        return block

    t0 = time.perf_counter()
    purpose = Purpose.SKELETON if monitoring.is_continuous else Purpose.GRID
    risk = run_blocks(events(model, purpose), n_paths, BLOCK, threads)
    ind, w = risk[:, 0], risk[:, 1]
    a = spot * math.exp(-model.delta * T)
    b = K * math.exp(-model.r * T)
    if route == "weighting":
        samples = a * w * ind - b * ind
        p_bar = summarize(w * ind, seed)
    elif route == "share":
        share = run_blocks(events(share_measure_model(model), Purpose.CHECK), n_paths, BLOCK, threads)
        p_bar = summarize(share[:, 0], seed)
        p = summarize(ind, seed)
        mean = a * p_bar.mean - b * p.mean
        se = math.hypot(a * p_bar.stderr, b * p.stderr)
        return MCEstimate(mean, se, n_paths, seed, time.perf_counter() - t0, {"p_bar": p_bar, "p": p, "route": route})
    else:
        raise ValueError(f"unknown route {route!r}")
    est = summarize(samples, seed, t0)
    return MCEstimate(
        est.mean,
        est.stderr,
        n_paths,
        seed,
        est.wall_time,
        {"p_bar": p_bar, "p": summarize(ind, seed), "weight_mean": summarize(w, seed), "route": route},
    )


def gap_distribution_sample(model: JumpDiffusionParams, T: float, n: int, n_paths: int, seed: int, threads: int = 1):
    """Samples of ``sqrt(n) (M_T - M_T^n)`` for the diffusion part of ``model``.

    The continuous maximum comes from exact bridge maxima on each grid cell given
    the simulated endpoints, so both maxima are read off the same path.
    """
    diff = model.diffusion_only() if model.lam > 0 else model
    dt = T / n

    def block(b, size):
        stream = make_stream(seed, b, Purpose.GAP)
        prev = np.zeros(size)
        m_disc = np.zeros(size)
        m_cont = np.zeros(size)
        for _ in range(n):
            nxt = prev + sample_increment(diff, dt, stream, size)
            u = 1.0 - stream.random(size)
            m_cont = np.maximum(m_cont, bridge_max_from_uniform(prev, nxt, dt, diff.sigma, u))
            m_disc = np.maximum(m_disc, nxt)
            prev = nxt
        return math.sqrt(n) * (m_cont - m_disc)

    return run_blocks(block, n_paths, BLOCK, threads)


@dataclass(frozen=True)
class LadderResult:
    """Prices on common paths: one continuous price and one discrete price per ``n``."""

    continuous: MCEstimate
    discrete: dict[int, MCEstimate]
    gaps: dict[int, MCEstimate]


def monitoring_ladder(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    ns: list[int],
    n_paths: int,
    seed: int,
    convention: RebateConvention = RebateConvention.HIT,
    threads: int = 1,
) -> LadderResult:
    """Continuous and discrete prices for several ``n`` on the same simulated paths.

    Simulates on the merged grid of ``lcm(ns)`` dates plus jump times; each coarser grid
    is a sub-lattice, so the discrete maxima are nested pathwise. ``gaps[n]`` is the
    estimate of ``discrete(n) - continuous`` with its paired standard error.
    """
    ns = sorted({int(n) for n in ns})
    if not ns or ns[0] < 1:
        raise ParameterError("ns must be a non-empty list of integers >= 1")
    fine = reduce(math.lcm, ns)
    T = spec.maturity

    def block(b, size):
        skel = simulate_skeleton_batch(model, T, size, make_stream(seed, b, Purpose.MERGED), grid_n=fine)
        reached, tau = skel.first_passage(spec.h, spec.is_up, make_stream(seed, b, Purpose.HIT_TIME))
        ext = skel.continuous_max() if spec.is_up else skel.continuous_min()
        reached = reached | barrier_reached(spec, ext)
        tau = np.where(np.isfinite(tau), tau, T)
        cols = [discounted_cashflows(spec, model.r, skel.terminal, reached, tau, convention)]
        vals = skel.grid_values()
        for n in ns:
            sub = vals[:, :: fine // n]
            hits = barrier_reached(spec, sub)
            hit = hits.any(axis=1)
            first = hits.argmax(axis=1) * (T / n)
            cols.append(discounted_cashflows(spec, model.r, skel.terminal, hit, first, convention))
        return np.column_stack(cols)

    t0 = time.perf_counter()
    samples = run_blocks(block, n_paths, MERGED_BLOCK, threads)
    cont = summarize(samples[:, 0], seed, t0)
    disc = {n: summarize(samples[:, i + 1], seed, n=n) for i, n in enumerate(ns)}
    gaps = {n: summarize(samples[:, i + 1] - samples[:, 0], seed, n=n) for i, n in enumerate(ns)}
    return LadderResult(cont, disc, gaps)


def martingale_check(model: JumpDiffusionParams, T: float, n_pairs: int, seed: int, threads: int = 1) -> MCEstimate:
    """Estimate of ``E[exp(X_T - (r - delta) T)]`` (should be 1), antithetic in the Gaussian part."""
    carry = model.r - model.delta

    def block(b, size):
        stream = make_stream(seed, b, Purpose.CHECK)
        z = stream.standard_normal(size)
        jumps = np.zeros(size)
        if model.lam > 0:
            jumps = sample_kou_sum(stream.poisson(model.lam * T, size), model.jumps, stream)
        base = model.gamma * T + jumps - carry * T
        s = model.sigma * math.sqrt(T) * z
        return 0.5 * (np.exp(base + s) + np.exp(base - s))

    return summarize(run_blocks(block, n_pairs, BLOCK, threads), seed)
