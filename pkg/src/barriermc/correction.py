"""Continuity correction between discretely and continuously monitored barrier prices.

A discrete barrier at ``H`` with ``n`` monitoring intervals behaves like a continuous
barrier at ``H exp(+/- sigma beta1 sqrt(T/n))`` (``+`` for up, ``-`` for down), and
conversely, up to ``o(1/sqrt(n))``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .bessel import BesselBetaEstimate
from .model import BarrierOptionSpec, Direction, JumpDiffusionParams, ParameterError, RebateConvention
from .pricing import MCEstimate, price_continuous, price_discrete, run_blocks, summarize, MERGED_BLOCK
from .rng import Purpose, make_stream
from .simulation import simulate_skeleton_batch


class CorrectionMode(str, enum.Enum):
    DISCRETE_FROM_CONTINUOUS = "discrete_from_continuous"
    CONTINUOUS_FROM_DISCRETE = "continuous_from_discrete"


def _beta_value(beta1) -> float:
    return beta1.value if isinstance(beta1, BesselBetaEstimate) else float(beta1)


def shift_size(sigma: float, T: float, n: int, beta1) -> float:
    """Log-barrier shift ``sigma * beta1 * sqrt(T / n)``."""
    return sigma * _beta_value(beta1) * math.sqrt(T / n)


def shifted_barrier(
    H: float,
    direction: Direction | str,
    sigma: float,
    T: float,
    n: int,
    beta1,
    mode: CorrectionMode | str = CorrectionMode.DISCRETE_FROM_CONTINUOUS,
) -> float:
    """Barrier to use in the *other* monitoring regime.

    ``discrete_from_continuous``: continuous barrier mimicking the discrete one,
    moved away from spot (up for Up options, down for Down options).
    ``continuous_from_discrete``: discrete barrier mimicking the continuous one,
    moved towards spot.
    """
    beta = _beta_value(beta1)
    if not (H > 0 and sigma > 0 and T > 0 and beta > 0) or n < 1:
        raise ParameterError("shifted_barrier needs positive H, sigma, T, beta1 and n >= 1")
    sign = 1.0 if Direction(direction) is Direction.UP else -1.0
    if CorrectionMode(mode) is CorrectionMode.CONTINUOUS_FROM_DISCRETE:
        sign = -sign
    return H * math.exp(sign * shift_size(sigma, T, n, beta))


@dataclass(frozen=True)
class CorrectionRequest:
    spec: BarrierOptionSpec
    n: int
    beta1: BesselBetaEstimate
    mode: CorrectionMode = CorrectionMode.DISCRETE_FROM_CONTINUOUS

    def __post_init__(self):
        object.__setattr__(self, "mode", CorrectionMode(self.mode))
        if self.n < 1:
            raise ParameterError("n must be >= 1")

    def target_barrier(self, sigma: float) -> float:
        return shifted_barrier(self.spec.barrier, self.spec.direction, sigma, self.spec.maturity, self.n, self.beta1, self.mode)


def _with_info(est: MCEstimate, barrier: float, beta1, bypassed: bool = False) -> MCEstimate:
    extra = dict(est.extra)
    extra.update(shifted_barrier=barrier, beta1_used=_beta_value(beta1), bypassed=bypassed)
    return MCEstimate(est.mean, est.stderr, est.n_paths, est.master_seed, est.wall_time, extra)


def corrected_discrete_price(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    n: int,
    n_paths: int,
    seed: int,
    beta1,
    convention: RebateConvention = RebateConvention.HIT,
    threads: int = 1,
) -> MCEstimate:
    """Approximate the ``n``-date discrete price by a continuous price at the shifted barrier."""
    if spec.breached_at_inception():
        est = price_discrete(model, spec, n, n_paths, seed, convention, threads)
        return _with_info(est, spec.barrier, beta1, bypassed=True)
    H = shifted_barrier(spec.barrier, spec.direction, model.sigma, spec.maturity, n, beta1)
    est = price_continuous(model, spec.with_barrier(H), n_paths, seed, convention, threads)
    return _with_info(est, H, beta1)


def corrected_continuous_price(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    n: int,
    n_paths: int,
    seed: int,
    beta1,
    convention: RebateConvention = RebateConvention.HIT,
    threads: int = 1,
) -> MCEstimate:
    """Approximate the continuous price by an ``n``-date discrete price at the inward-shifted barrier."""
    if spec.breached_at_inception():
        est = price_continuous(model, spec, n_paths, seed, convention, threads)
        return _with_info(est, spec.barrier, beta1, bypassed=True)
    H = shifted_barrier(
        spec.barrier, spec.direction, model.sigma, spec.maturity, n, beta1, CorrectionMode.CONTINUOUS_FROM_DISCRETE
    )
    est = price_discrete(model, spec.with_barrier(H), n, n_paths, seed, convention, threads)
    return _with_info(est, H, beta1)


def apply_correction(
    model: JumpDiffusionParams,
    request: CorrectionRequest,
    n_paths: int,
    seed: int,
    convention: RebateConvention = RebateConvention.HIT,
    threads: int = 1,
) -> MCEstimate:
    fn = (
        corrected_discrete_price
        if request.mode is CorrectionMode.DISCRETE_FROM_CONTINUOUS
        else corrected_continuous_price
    )
    return fn(model, request.spec, request.n, n_paths, seed, request.beta1, convention, threads)


@dataclass(frozen=True)
class ProbabilityPair:
    """Both sides of a probability-level correction, estimated on common paths."""

    continuous: MCEstimate
    discrete: MCEstimate
    difference: MCEstimate

    @property
    def combined_stderr(self) -> float:
        return math.hypot(self.continuous.stderr, self.discrete.stderr)


def corrected_probability(
    model: JumpDiffusionParams,
    x: float,
    y: float,
    T: float,
    n: int,
    n_paths: int,
    seed: int,
    beta1,
    side: str = "continuous",
    threads: int = 1,
) -> ProbabilityPair:
    """Estimate both sides of the probability-level correction.

    ``side`` names where the shift ``s = sigma beta1 sqrt(T/n)`` is applied:
    ``"continuous"`` compares ``P(M_T < x + s, X_T > y)`` with ``P(M^n_T < x, X_T > y)``;
    ``"discrete"`` compares ``P(M_T < x, X_T > y)`` with ``P(M^n_T < x - s, X_T > y)``.
    Both sides use the same merged-grid paths.
    """
    if not x > 0:
        raise ParameterError("x must be positive")
    s = shift_size(model.sigma, T, n, beta1)
    if side == "continuous":
        x_cont, x_disc = x + s, x
    elif side == "discrete":
        x_cont, x_disc = x, x - s
    else:
        raise ValueError(f"side must be 'continuous' or 'discrete', got {side!r}")

    def block(b, size):
        skel = simulate_skeleton_batch(model, T, size, make_stream(seed, b, Purpose.MERGED), grid_n=n)
        above = skel.terminal > y
        cont = (skel.continuous_max() < x_cont) & above
        disc = (skel.discrete_max() < x_disc) & above
        return np.column_stack([cont, disc]).astype(float)

    samples = run_blocks(block, n_paths, MERGED_BLOCK, threads)
    return ProbabilityPair(
        continuous=summarize(samples[:, 0], seed),
        discrete=summarize(samples[:, 1], seed),
        difference=summarize(samples[:, 0] - samples[:, 1], seed),
    )
