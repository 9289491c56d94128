"""Monte Carlo pricing of discretely and continuously monitored barrier options
under a double-exponential jump-diffusion, with the continuity correction."""

__version__ = "0.1.0"

from .bessel import BesselBetaEstimate, cached_beta1, estimate_beta1
from .correction import (
    CorrectionMode,
    corrected_continuous_price,
    corrected_discrete_price,
    corrected_probability,
    shifted_barrier,
)
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
)
from .pricing import MCEstimate, price, price_continuous, price_discrete

__all__ = [
    "BarrierOptionSpec",
    "BesselBetaEstimate",
    "CorrectionMode",
    "Direction",
    "JumpDiffusionParams",
    "Knock",
    "KouJumpParams",
    "MCEstimate",
    "MonitoringScheme",
    "OptionKind",
    "ParameterError",
    "RebateConvention",
    "cached_beta1",
    "corrected_continuous_price",
    "corrected_discrete_price",
    "corrected_probability",
    "estimate_beta1",
    "price",
    "price_continuous",
    "price_discrete",
    "shifted_barrier",
]
