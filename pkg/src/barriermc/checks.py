"""Statistical validation helpers and the invariant suite run by ``barriermc check``."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .bessel import (
    bessel_bridge_min_bound,
    bessel_bridge_min_cdf,
    bessel_transition_density,
    sample_lattice_minimum,
)
from .model import BarrierOptionSpec, JumpDiffusionParams, Knock
from .pricing import gap_distribution_sample, martingale_check, price_continuous, price_discrete
from .rng import Purpose, conditional_jump_times, make_stream

# sqrt(-ln(alpha/2)/2) for alpha = 0.01
KS_C_1PCT = math.sqrt(-math.log(0.005) / 2.0)


def ks_critical(n: int, m: int | None = None) -> float:
    """Asymptotic 1% critical value of the KS distance (one- or two-sample)."""
    if m is None:
        return KS_C_1PCT / math.sqrt(n)
    return KS_C_1PCT * math.sqrt((n + m) / (n * m))


def ks_distance(sample, cdf) -> float:
    x = np.sort(np.asarray(sample))
    n = x.size
    f = cdf(x)
    hi = np.arange(1, n + 1) / n - f
    lo = f - np.arange(n) / n
    return float(max(hi.max(), lo.max()))


def ks_distance_2samp(a, b) -> float:
    a = np.sort(np.asarray(a))
    b = np.sort(np.asarray(b))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def check_parity(model, spec: BarrierOptionSpec, n_paths: int, seed: int, n: int | None = None) -> CheckResult:
    """In + Out = vanilla on common random numbers (rebate 0)."""
    out_spec = replace(spec, knock=Knock.OUT, rebate=0.0)
    in_spec = replace(spec, knock=Knock.IN, rebate=0.0)
    # H beyond reach: the Out leg is the vanilla payoff on the same paths
    far = out_spec.with_barrier(spec.spot * 1e12) if spec.is_up else out_spec.with_barrier(spec.spot * 1e-12)
    if n is None:
        prices = [price_continuous(model, s, n_paths, seed) for s in (in_spec, out_spec, far)]
    else:
        prices = [price_discrete(model, s, n, n_paths, seed) for s in (in_spec, out_spec, far)]
    p_in, p_out, p_van = (p.mean for p in prices)
    err = abs(p_in + p_out - p_van)
    tag = "continuous" if n is None else f"n={n}"
    return CheckResult(f"in/out parity ({tag})", err <= 1e-9 * max(1.0, p_van), f"|in+out-vanilla|={err:.2e}")


def check_martingale(model: JumpDiffusionParams, T: float, n_pairs: int, seed: int) -> CheckResult:
    est = martingale_check(model, T, n_pairs, seed)
    dev = abs(est.mean - 1.0)
    return CheckResult("martingale", dev <= 3 * est.stderr, f"E[e^(X_T-(r-delta)T)]={est.mean:.6f} +/- {est.stderr:.1e}")


def check_kernel_normalization(tol: float = 1e-8) -> CheckResult:
    worst = 0.0
    for t, x in [(0.1, 0.0), (1.0, 0.0), (4.0, 0.0), (1.0, 0.5), (1.0, 2.0)]:
        val, _ = integrate.quad(lambda y: bessel_transition_density(t, x, y), 0, np.inf, epsabs=1e-12, epsrel=1e-12)
        worst = max(worst, abs(val - 1.0))
    return CheckResult("Bessel kernel normalization", worst <= tol, f"max |integral-1|={worst:.1e}")


def check_jump_time_bounds(n_draws: int, seed: int) -> CheckResult:
    """Conditional jump-time bounds given ``N_t = l``, each tested at 3 stderr.

    ``E[1/sqrt(gap)] <= 2l/sqrt(t)`` and ``P(gap <= alpha t) <= l alpha`` for every
    inter-jump gap, including the last one ``t - T_l``.
    """
    violations = []
    for k, (l, t) in enumerate([(l, t) for l in (1, 2, 5) for t in (0.5, 1.0)]):
        times = conditional_jump_times(l, t, make_stream(seed, k, Purpose.CHECK), size=n_draws)
        edges = np.concatenate([np.zeros((n_draws, 1)), times, np.full((n_draws, 1), t)], axis=1)
        for i, g in enumerate(np.diff(edges, axis=1).T):
            v = 1.0 / np.sqrt(g)
            if v.mean() - 2 * l / math.sqrt(t) > 3 * v.std(ddof=1) / math.sqrt(n_draws):
                violations.append(f"moment l={l} t={t} i={i}")
            for alpha in (0.01, 0.1):
                ind = g <= alpha * t
                if ind.mean() - l * alpha > 3 * ind.std(ddof=1) / math.sqrt(n_draws):
                    violations.append(f"gap l={l} t={t} i={i} alpha={alpha}")
    detail = "all bounds respected" if not violations else ", ".join(violations)
    return CheckResult("jump-time bounds", not violations, detail)


def check_bridge_min_bound(n_points: int, seed: int) -> CheckResult:
    rng = make_stream(seed, 0, Purpose.CHECK)
    t1 = rng.uniform(0.01, 2.0, n_points)
    T = rng.uniform(0.01, 3.0, n_points)
    y = rng.uniform(0.01, 3.0, n_points)
    m = rng.uniform(0.01, 3.0, n_points)
    b = rng.uniform(0.0, 1.0, n_points) * np.minimum(y, m) * 1.2
    cdf = np.array([bessel_bridge_min_cdf(a, a + d, yy, mm, bb) for a, d, yy, mm, bb in zip(t1, T, y, m, b)])
    bound = np.minimum(1.0, bessel_bridge_min_bound(y, m, b))
    excess = float((cdf - bound).max())
    return CheckResult("Bessel-bridge minimum bound", excess <= 1e-12, f"max(cdf - bound)={excess:.1e}")


def check_gap_law(model: JumpDiffusionParams, T: float, n: int, n_paths: int, seed: int) -> CheckResult:
    """``sqrt(n)(M - M^n)`` against ``sigma sqrt(T) R`` by two-sample KS."""
    gap = gap_distribution_sample(model, T, n, n_paths, seed)
    limit = model.sigma * math.sqrt(T) * sample_lattice_minimum(20, n_paths, seed + 1, complete_tail=True)
    d = ks_distance_2samp(gap, limit)
    crit = ks_critical(n_paths, n_paths)
    return CheckResult("gap limit law (KS)", d < crit, f"D={d:.4f} < crit={crit:.4f}")


def run_check_suite(
    model: JumpDiffusionParams,
    spec: BarrierOptionSpec,
    seed: int,
    n_paths: int = 200_000,
    gamma_offset: float = 0.0,
) -> list[CheckResult]:
    """Parity, martingale, kernel normalisation, jump-time bounds, bridge-minimum bound, gap law.

    The gap law is checked at n = 1024: at n = 256 the finite-n boundary effect sits
    right at the 1% KS critical value for 10^4 paths, so verdicts would depend on the seed.
    """
    sim_model = model.perturbed(gamma_offset) if gamma_offset else model
    T = spec.maturity
    return [
        check_parity(sim_model, spec, n_paths, seed, n=10),
        check_parity(sim_model, spec, n_paths, seed),
        check_martingale(sim_model, T, 2_000_000, seed),
        check_kernel_normalization(),
        check_jump_time_bounds(200_000, seed),
        check_bridge_min_bound(10_000, seed),
        check_gap_law(sim_model.diffusion_only(), T, 1024, 10_000, seed),
    ]
