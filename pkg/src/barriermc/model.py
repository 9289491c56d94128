"""Jump-diffusion model parameters and barrier option payoffs.

The log-price is ``X_t = gamma*t + sigma*B_t + sum_{i<=N_t} Y_i`` with ``S_t = S0*exp(X_t)``,
``N`` a Poisson process and ``Y_i`` i.i.d. asymmetric double-exponential jumps.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np


class ParameterError(ValueError):
    """Raised when model or contract parameters fall outside their domain."""


class OptionKind(str, enum.Enum):
    CALL = "call"
    PUT = "put"


class Direction(str, enum.Enum):
    UP = "up"
    DOWN = "down"


class Knock(str, enum.Enum):
    IN = "in"
    OUT = "out"


class RebateConvention(str, enum.Enum):
    """When the rebate is paid and how it is discounted.

    ``HIT``: knock-out rebate paid at the breach time, discounted from it.
    ``MATURITY``: paid at maturity, discounted by ``exp(-r*T)``.
    ``HIT_UNDISCOUNTED``: rebate leg carries no discounting at all.

    Knock-in rebates (barrier never reached) are always due at maturity; they are
    discounted by ``exp(-r*T)`` except under ``HIT_UNDISCOUNTED``.
    """

    HIT = "hit"
    MATURITY = "maturity"
    HIT_UNDISCOUNTED = "hit_undiscounted"


@dataclass(frozen=True)
class KouJumpParams:
    """Double-exponential jump law: up with probability ``p`` and rate ``eta1``, down with rate ``eta2``."""

    p: float
    eta1: float
    eta2: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"p must lie in [0, 1], got {self.p}")
        if self.p > 0 and not self.eta1 > 1.0:
            raise ParameterError(f"eta1 must exceed 1 for E[exp(Y)] to be finite, got {self.eta1}")
        if self.p < 1 and not self.eta2 > 0.0:
            raise ParameterError(f"eta2 must be positive, got {self.eta2}")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def mean(self) -> float:
        up = self.p / self.eta1 if self.p > 0 else 0.0
        down = self.q / self.eta2 if self.q > 0 else 0.0
        return up - down

    @property
    def second_moment(self) -> float:
        up = 2.0 * self.p / self.eta1**2 if self.p > 0 else 0.0
        down = 2.0 * self.q / self.eta2**2 if self.q > 0 else 0.0
        return up + down

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        neg = self.q * np.exp(self.eta2 * np.minimum(y, 0.0)) if self.q > 0 else np.zeros_like(y)
        pos = 1.0 - self.p * np.exp(-self.eta1 * np.maximum(y, 0.0)) if self.p > 0 else np.ones_like(y)
        return np.where(y < 0, neg, pos)

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        pos = self.p * self.eta1 * np.exp(-self.eta1 * np.maximum(y, 0.0)) if self.p > 0 else 0.0 * y
        neg = self.q * self.eta2 * np.exp(self.eta2 * np.minimum(y, 0.0)) if self.q > 0 else 0.0 * y
        return np.where(y >= 0, pos, neg)


def kou_exp_moment(jumps: KouJumpParams) -> float:
    """Return ``E[exp(Y)] = p*eta1/(eta1 - 1) + q*eta2/(eta2 + 1)``."""
    if jumps.p > 0 and not jumps.eta1 > 1.0:
        raise ParameterError(f"eta1 must exceed 1, got {jumps.eta1}")
    up = jumps.p * jumps.eta1 / (jumps.eta1 - 1.0) if jumps.p > 0 else 0.0
    down = jumps.q * jumps.eta2 / (jumps.eta2 + 1.0) if jumps.q > 0 else 0.0
    return up + down


def martingale_drift(r: float, delta: float, sigma: float, lam: float, jumps: KouJumpParams) -> float:
    """Drift making ``exp(-(r - delta) t) S_t`` a martingale.

    ``gamma = r - delta - sigma^2/2 - lam * (E[exp(Y)] - 1)``; the jump compensator
    enters with a minus sign.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if lam < 0:
        raise ParameterError(f"jump intensity must be non-negative, got {lam}")
    compensator = lam * (kou_exp_moment(jumps) - 1.0) if lam > 0 else 0.0
    return r - delta - 0.5 * sigma**2 - compensator


@dataclass(frozen=True)
class JumpDiffusionParams:
    r: float
    delta: float
    sigma: float
    lam: float
    jumps: KouJumpParams
    gamma: float = field(init=False)
    # testing hook for sensitivity checks; never set from configuration
    gamma_offset: float = field(default=0.0, repr=False)

    def __post_init__(self):
        g = martingale_drift(self.r, self.delta, self.sigma, self.lam, self.jumps)
        object.__setattr__(self, "gamma", g + self.gamma_offset)

    @classmethod
    def black_scholes(cls, r: float, delta: float, sigma: float) -> "JumpDiffusionParams":
        return cls(r, delta, sigma, 0.0, KouJumpParams(0.5, 2.0, 1.0))

    def perturbed(self, gamma_offset: float) -> "JumpDiffusionParams":
        """Copy with the drift shifted off its martingale value (used to test the martingale check)."""
        return replace(self, gamma_offset=gamma_offset)

    def diffusion_only(self) -> "JumpDiffusionParams":
        return replace(self, lam=0.0)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "delta": self.delta,
            "sigma": self.sigma,
            "lambda": self.lam,
            "p": self.jumps.p,
            "eta1": self.jumps.eta1,
            "eta2": self.jumps.eta2,
        }


@dataclass(frozen=True)
class BarrierOptionSpec:
    kind: OptionKind
    direction: Direction
    knock: Knock
    strike: float
    barrier: float
    rebate: float = 0.0
    maturity: float = 1.0
    spot: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "kind", OptionKind(self.kind))
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "knock", Knock(self.knock))
        for name in ("strike", "barrier", "maturity", "spot"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ParameterError(f"{name} must be strictly positive and finite, got {v}")
        if not self.rebate >= 0:
            raise ParameterError(f"rebate must be non-negative, got {self.rebate}")

    @property
    def k(self) -> float:
        return math.log(self.strike / self.spot)

    @property
    def h(self) -> float:
        return math.log(self.barrier / self.spot)

    @property
    def is_up(self) -> bool:
        return self.direction is Direction.UP

    @property
    def is_out(self) -> bool:
        return self.knock is Knock.OUT

    def with_barrier(self, barrier: float) -> "BarrierOptionSpec":
        return replace(self, barrier=barrier)

    def breached_at_inception(self) -> bool:
        """True when spot already sits on the knocked side of the barrier."""
        return self.spot >= self.barrier if self.is_up else self.spot <= self.barrier

    def label(self) -> str:
        return f"{self.direction.value}-{self.knock.value} {self.kind.value}"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "direction": self.direction.value,
            "knock": self.knock.value,
            "strike": self.strike,
            "barrier": self.barrier,
            "rebate": self.rebate,
            "maturity": self.maturity,
            "spot": self.spot,
        }


@dataclass(frozen=True)
class MonitoringScheme:
    """``n=None`` means continuous monitoring; otherwise dates ``k*T/n`` for ``k=0..n``."""

    n: int | None = None

    def __post_init__(self):
        if self.n is not None and (int(self.n) != self.n or self.n < 1):
            raise ParameterError(f"number of monitoring intervals must be an integer >= 1, got {self.n}")

    @classmethod
    def continuous(cls) -> "MonitoringScheme":
        return cls(None)

    @classmethod
    def discrete(cls, n: int) -> "MonitoringScheme":
        return cls(int(n))

    @property
    def is_continuous(self) -> bool:
        return self.n is None


def vanilla_payoff(spec: BarrierOptionSpec, terminal_log):
    s_t = spec.spot * np.exp(np.asarray(terminal_log, dtype=float))
    if spec.kind is OptionKind.CALL:
        return np.maximum(s_t - spec.strike, 0.0)
    return np.maximum(spec.strike - s_t, 0.0)


def barrier_reached(spec: BarrierOptionSpec, extreme_log):
    """Indicator of the knock event: ``S0 e^M >= H`` (up) or ``S0 e^m <= H`` (down)."""
    level = spec.spot * np.exp(np.asarray(extreme_log, dtype=float))
    return level >= spec.barrier if spec.is_up else level <= spec.barrier


def option_alive(spec: BarrierOptionSpec, extreme_log):
    """True where the barrier leg pays: Out survives on the strict side, In needs the knock."""
    reached = barrier_reached(spec, extreme_log)
    return ~reached if spec.is_out else reached


def payoff(spec: BarrierOptionSpec, terminal_log, extreme_log):
    """Undiscounted cash flow: vanilla payoff when alive, rebate otherwise.

    ``extreme_log`` is the running max (up options) or min (down options) of ``X``
    over the monitoring set. Timing and discounting of the rebate leg are applied
    by the pricers according to :class:`RebateConvention`.
    """
    alive = option_alive(spec, extreme_log)
    out = np.where(alive, vanilla_payoff(spec, terminal_log), spec.rebate)
    return out[()] if out.ndim == 0 else out
