import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barriermc.bessel import BesselBetaEstimate
from barriermc.correction import (
    CorrectionMode,
    CorrectionRequest,
    apply_correction,
    corrected_continuous_price,
    corrected_discrete_price,
    corrected_probability,
    shift_size,
    shifted_barrier,
)
from barriermc.model import BarrierOptionSpec, JumpDiffusionParams, ParameterError
from barriermc.pricing import price_continuous, price_discrete

BETA = 0.5826
INV = CorrectionMode.CONTINUOUS_FROM_DISCRETE


def test_shift_examples():
    assert shifted_barrier(110, "up", 0.3, 1.0, 25, BETA) == pytest.approx(113.913, abs=5e-4)
    assert shifted_barrier(110, "down", 0.3, 1.0, 25, BETA) == pytest.approx(110 * math.exp(-0.034956), abs=1e-3)
    assert shifted_barrier(110, "down", 0.3, 1.0, 25, BETA) == pytest.approx(106.221, abs=5e-4)
    assert shift_size(0.3, 1.0, 25, BETA) == pytest.approx(0.034956, abs=1e-9)


def test_shift_vanishes_for_large_n():
    assert shifted_barrier(110, "up", 0.3, 1.0, 10**12, BETA) == pytest.approx(110, rel=1e-6)


def test_shift_accepts_estimate_objects():
    est = BesselBetaEstimate.pinned(BETA)
    assert shifted_barrier(110, "up", 0.3, 1.0, 25, est) == shifted_barrier(110, "up", 0.3, 1.0, 25, BETA)


def test_shift_domain():
    for args in [(-1, "up", 0.3, 1, 5, BETA), (110, "up", 0.0, 1, 5, BETA), (110, "up", 0.3, 1, 0, BETA),
                 (110, "up", 0.3, 1, 5, 0.0)]:
        with pytest.raises(ParameterError):
            shifted_barrier(*args)


@given(
    H=st.floats(1, 1000),
    sigma=st.floats(0.01, 2),
    T=st.floats(0.01, 10),
    n=st.integers(1, 10**6),
    beta=st.floats(0.1, 1.0),
    up=st.booleans(),
)
@settings(max_examples=200, deadline=None)
def test_shift_sign_and_round_trip(H, sigma, T, n, beta, up):
    d = "up" if up else "down"
    fwd = shifted_barrier(H, d, sigma, T, n, beta)
    assert (fwd > H) if up else (fwd < H)
    back = shifted_barrier(fwd, d, sigma, T, n, beta, INV)
    assert back == pytest.approx(H, rel=1e-14)


def test_request_validation():
    spec = BarrierOptionSpec("put", "up", "out", 100, 110)
    req = CorrectionRequest(spec, 25, BesselBetaEstimate.pinned(BETA), "continuous_from_discrete")
    assert req.mode is INV
    assert req.target_barrier(0.3) == pytest.approx(110 * math.exp(-0.034956), abs=1e-3)
    with pytest.raises(ParameterError):
        CorrectionRequest(spec, 0, BesselBetaEstimate.pinned(BETA))
    with pytest.raises(ValueError):
        CorrectionRequest(spec, 5, BesselBetaEstimate.pinned(BETA), "sideways")


def test_corrected_prices_use_shifted_barriers(kou_model, table_spec):
    a = corrected_discrete_price(kou_model, table_spec, 10, 20000, 1, BETA)
    b = price_continuous(kou_model, table_spec.with_barrier(a.extra["shifted_barrier"]), 20000, 1)
    assert a.mean == b.mean and a.extra["beta1_used"] == BETA and not a.extra["bypassed"]
    c = corrected_continuous_price(kou_model, table_spec, 10, 20000, 1, BETA)
    d = price_discrete(kou_model, table_spec.with_barrier(c.extra["shifted_barrier"]), 10, 20000, 1)
    assert c.mean == d.mean
    assert c.extra["shifted_barrier"] < 110 < a.extra["shifted_barrier"]
    req = CorrectionRequest(table_spec, 10, BesselBetaEstimate.pinned(BETA), INV)
    assert apply_correction(kou_model, req, 20000, 1).mean == c.mean


def test_breached_spec_bypasses_correction(kou_model):
    spec = BarrierOptionSpec("put", "up", "out", 100, 95, rebate=2.0)
    est = corrected_discrete_price(kou_model, spec, 5, 1000, 1, BETA)
    assert est.extra["bypassed"] and est.mean == pytest.approx(2.0)
    est = corrected_continuous_price(kou_model, spec, 5, 1000, 1, BETA)
    assert est.extra["bypassed"] and est.extra["shifted_barrier"] == 95


def test_correction_beats_uncorrected_bs():
    """Pure diffusion: the shifted continuous price is closer to the discrete price than the plain one."""
    model = JumpDiffusionParams.black_scholes(0.05, 0.0, 0.3)
    spec = BarrierOptionSpec("call", "up", "out", 100, 130)
    disc = price_discrete(model, spec, 10, 200000, 2)
    plain = price_continuous(model, spec, 200000, 3)
    corr = corrected_discrete_price(model, spec, 10, 200000, 3, BETA)
    assert abs(corr.mean - disc.mean) < abs(plain.mean - disc.mean)


@pytest.mark.parametrize("side", ["continuous", "discrete"])
@pytest.mark.parametrize("n", [16, 64])
@pytest.mark.parametrize("jumps", [True, False])
def test_probability_level_correction(kou_model, side, n, jumps):
    model = kou_model if jumps else kou_model.diffusion_only()
    pair = corrected_probability(model, math.log(1.1), 0.0, 1.0, n, 200000, 4, BETA, side)
    assert abs(pair.difference.mean) <= 3 * pair.combined_stderr + 0.5 / n


def test_probability_far_barrier(kou_model):
    pair = corrected_probability(kou_model, 50.0, 0.0, 1.0, 16, 20000, 5, BETA)
    assert pair.difference.mean == 0.0
    assert pair.continuous.mean == pytest.approx(pair.discrete.mean)


def test_probability_errors(kou_model):
    with pytest.raises(ParameterError):
        corrected_probability(kou_model, 0.0, 0.0, 1.0, 16, 100, 5, BETA)
    with pytest.raises(ValueError):
        corrected_probability(kou_model, 0.1, 0.0, 1.0, 16, 100, 5, BETA, side="both")
