"""
Error bounds for Gaussian-window chirplet separation.

All quantities are certificates about a synthetic model at one instant:
the local-LFM remainder Π, the cross-component leakage Υ and its refined
pairwise form Υ_{ℓ,k}, the residual Res_ℓ and the IF, chirp-rate and
recovery bounds Bd₁, Bd₂, Bd₃. A bound whose precondition fails is None.
"""
import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from core.errors import InvalidArgumentError
from core.models import BoundContext, BoundReport, HypothesisCheck, SeparationParams, SignalModel
from core.signal_model import ground_truth_curves
from core.window import B0_GAUSSIAN, beta_inv, decay_level, gamma_inv, moment

logger = logging.getLogger(__name__)

_LEVEL_SLACK = 1e-12


def context_at(model: SignalModel, t: float, sigma: float, delta: float, rho: float) -> BoundContext:
    """
    BoundContext of a model at t.

    ε₁ and ε₃ are the largest per-component constants, taken from the model's
    own derivatives rather than estimated from samples.
    """
    amps, d1, d2 = ground_truth_curves(model, t)
    try:
        return BoundContext(
            t=float(t),
            epsilon1=max(c.amplitude_lipschitz_rel for c in model.components),
            epsilon3=max(c.phase_d3_sup for c in model.components),
            sigma=float(sigma), delta=float(delta), rho=float(rho),
            amplitudes=tuple(float(a) for a in amps[:, 0]),
            if_values=tuple(float(f) for f in d1[:, 0]),
            cr_values=tuple(float(r) for r in d2[:, 0]),
        )
    except ValidationError as e:
        raise InvalidArgumentError(str(e)) from e


def pi_bound(ctx: BoundContext) -> float:
    """Π = ε₁I₁σ + (π/3)ε₃I₃σ³."""
    return ctx.epsilon1 * moment(1) * ctx.sigma + (math.pi / 3.0) * ctx.epsilon3 * moment(3) * ctx.sigma ** 3


def remainder_bound(ctx: BoundContext) -> float:
    """M·Π, the bound on |Q_x - P_x| at the context's instant."""
    return ctx.M * pi_bound(ctx)


def upsilon(ctx: BoundContext) -> float:
    """Υ = L/(√σ·min{√σ, 1}·√Δ) with L = max{2^{1/4}, √ρ}/√π."""
    level = decay_level(ctx.rho)
    root = math.sqrt(ctx.sigma)
    return level / (root * min(root, 1.0) * math.sqrt(ctx.delta))


def upsilon_pair(ctx: BoundContext, ell: int, k: int) -> float:
    """
    Leakage of component k into component ℓ's Z-box.

    The refined Gaussian form applies when |Δφ′| > Δ and
    1 + 4π²σ⁴(|Δφ″| + Δ/ρ)² <= 8π²σ²(|Δφ′| - Δ)²; the result never exceeds Υ.
    """
    if ell == k:
        raise InvalidArgumentError("upsilon_pair needs two distinct components")
    if not (0 <= ell < ctx.n and 0 <= k < ctx.n):
        raise InvalidArgumentError(f"component index out of range for {ctx.n} components")
    generic = upsilon(ctx)
    if_gap = abs(ctx.if_values[ell] - ctx.if_values[k])
    cr_gap = abs(ctx.cr_values[ell] - ctx.cr_values[k])
    if if_gap <= ctx.delta:
        return generic
    s = ctx.sigma
    spread = 1.0 + 4.0 * math.pi ** 2 * s ** 4 * (cr_gap + ctx.delta / ctx.rho) ** 2
    reach = 2.0 * math.pi ** 2 * s ** 2 * (if_gap - ctx.delta) ** 2
    if spread > 4.0 * reach:
        return generic
    return min(generic, spread ** -0.25 * math.exp(-reach / spread))


def upsilon_matrix(ctx: BoundContext) -> List[List[Optional[float]]]:
    return [[None if ell == k else upsilon_pair(ctx, ell, k) for k in range(ctx.n)] for ell in range(ctx.n)]


def res_bound(ctx: BoundContext) -> List[float]:
    """Res_ℓ = MΠ + Σ_{k≠ℓ} A_k Υ_{ℓ,k} for every component."""
    base = ctx.M * pi_bound(ctx)
    return [
        base + sum(ctx.amplitudes[k] * upsilon_pair(ctx, ell, k) for k in range(ctx.n) if k != ell)
        for ell in range(ctx.n)
    ]


def precision_level(res: float, amplitude: float) -> Optional[float]:
    """ξ = 1 - 2Res/A, or None when 2Res/A exceeds 1 - e^{-1/4}."""
    if res < 0 or amplitude <= 0:
        raise InvalidArgumentError(f"need res >= 0 and amplitude > 0, got {res}, {amplitude}")
    ratio = 2.0 * res / amplitude
    if ratio > B0_GAUSSIAN + _LEVEL_SLACK:
        return None
    return 1.0 - min(ratio, B0_GAUSSIAN)


def if_bound(res: float, amplitude: float, sigma: float) -> Optional[float]:
    xi = precision_level(res, amplitude)
    return None if xi is None else float(beta_inv(xi)) / sigma


def cr_bound(res: float, amplitude: float, sigma: float) -> Optional[float]:
    xi = precision_level(res, amplitude)
    return None if xi is None else float(gamma_inv(xi)) / sigma ** 2


def recovery_bound(res: float, amplitude: float) -> Optional[float]:
    """Res + 2e^{1/8}I₁√(Res·A) + I₂A√(1 - ξ⁴)/(2ξ²)."""
    xi = precision_level(res, amplitude)
    if xi is None:
        return None
    return (res + 2.0 * math.exp(0.125) * moment(1) * math.sqrt(res * amplitude)
            + moment(2) * amplitude * math.sqrt(1.0 - xi ** 4) / (2.0 * xi * xi))


def recovery_bound_sharp(res: float, amplitude: float) -> Optional[float]:
    """Res + 2πI₁Aβ⁻¹(ξ) + πI₂Aγ⁻¹(ξ); never larger than recovery_bound."""
    xi = precision_level(res, amplitude)
    if xi is None:
        return None
    return (res + 2.0 * math.pi * moment(1) * amplitude * float(beta_inv(xi))
            + math.pi * moment(2) * amplitude * float(gamma_inv(xi)))


def _component(ctx: BoundContext, ell: int) -> float:
    if not 0 <= ell < ctx.n:
        raise InvalidArgumentError(f"component index {ell} out of range for {ctx.n} components")
    return res_bound(ctx)[ell]


def bd1(ctx: BoundContext, ell: int) -> Optional[float]:
    """IF error bound in Hz."""
    return if_bound(_component(ctx, ell), ctx.amplitudes[ell], ctx.sigma)


def bd2(ctx: BoundContext, ell: int) -> Optional[float]:
    """Chirp-rate error bound in Hz/s."""
    return cr_bound(_component(ctx, ell), ctx.amplitudes[ell], ctx.sigma)


def bd3(ctx: BoundContext, ell: int) -> Optional[float]:
    """Recovery error bound, closed form."""
    return recovery_bound(_component(ctx, ell), ctx.amplitudes[ell])


def bd3_sharp(ctx: BoundContext, ell: int) -> Optional[float]:
    return recovery_bound_sharp(_component(ctx, ell), ctx.amplitudes[ell])


def z_box_contains(ctx: BoundContext, ell: int, eta, lam):
    """|η - φ′_ℓ| + ρ|λ - φ″_ℓ| < Δ, elementwise."""
    dist = np.abs(np.asarray(eta, dtype=float) - ctx.if_values[ell]) + \
        ctx.rho * np.abs(np.asarray(lam, dtype=float) - ctx.cr_values[ell])
    inside = dist < ctx.delta
    return bool(inside) if inside.ndim == 0 else inside


def resolved_threshold(ctx: BoundContext, params: SeparationParams) -> float:
    """ε̃₁ the hypothesis check uses; a fraction applies to the largest amplitude."""
    if params.threshold_mode == "absolute":
        return float(params.threshold)
    return float(params.threshold * max(ctx.amplitudes))


def hypotheses_for(ctx: BoundContext, params: SeparationParams) -> List[HypothesisCheck]:
    """Separation, interference, threshold and per-component precision checks."""
    checks = []

    gaps = [
        (abs(ctx.if_values[a] - ctx.if_values[b]) + ctx.rho * abs(ctx.cr_values[a] - ctx.cr_values[b]), a, b)
        for a in range(ctx.n) for b in range(a + 1, ctx.n)
    ]
    if gaps:
        gap, a, b = min(gaps)
        margin = gap - 2.0 * ctx.delta
        checks.append(HypothesisCheck(
            name="separation", passed=margin >= 0.0, margin=margin,
            detail=f"closest pair ({a}, {b}): |dphi'| + rho|dphi''| = {gap:.6g} vs 2*delta = {2 * ctx.delta:.6g}",
        ))

    leak = ctx.M * (upsilon(ctx) + pi_bound(ctx))
    margin = ctx.mu - 2.0 * leak
    checks.append(HypothesisCheck(
        name="interference", passed=margin >= 0.0, margin=margin,
        detail=f"2M(upsilon + pi) = {2 * leak:.6g} vs mu = {ctx.mu:.6g}",
    ))

    level = resolved_threshold(ctx, params)
    margin = min(level - leak, ctx.mu - leak - level)
    checks.append(HypothesisCheck(
        name="threshold", passed=margin >= 0.0, margin=margin,
        detail=f"need {leak:.6g} <= {level:.6g} <= {ctx.mu - leak:.6g}",
    ))

    for ell, res in enumerate(res_bound(ctx)):
        margin = B0_GAUSSIAN - 2.0 * res / ctx.amplitudes[ell]
        checks.append(HypothesisCheck(
            name=f"precision_{ell}", passed=margin >= 0.0, margin=margin,
            detail=f"2Res/A = {2 * res / ctx.amplitudes[ell]:.6g} vs {B0_GAUSSIAN:.6g}",
        ))
    return checks


def check_hypotheses(model: SignalModel, t: float, params: SeparationParams, sigma: float) -> List[HypothesisCheck]:
    ctx = context_at(model, t, sigma, params.delta, params.rho)
    return hypotheses_for(ctx, params)


def bound_report(ctx: BoundContext, params: Optional[SeparationParams] = None) -> BoundReport:
    """Every bound at one instant, with hypothesis checks when params are given."""
    res = res_bound(ctx)
    report = BoundReport(
        t=ctx.t,
        pi=pi_bound(ctx),
        upsilon=upsilon(ctx),
        upsilon_pairs=upsilon_matrix(ctx),
        res=res,
        bd1=[if_bound(r, a, ctx.sigma) for r, a in zip(res, ctx.amplitudes)],
        bd2=[cr_bound(r, a, ctx.sigma) for r, a in zip(res, ctx.amplitudes)],
        bd3=[recovery_bound(r, a) for r, a in zip(res, ctx.amplitudes)],
        hypotheses=hypotheses_for(ctx, params) if params is not None else [],
    )
    return report


def bound_curves(
    model: SignalModel,
    t_axis: Sequence[float],
    params: SeparationParams,
    sigma,
) -> List[BoundReport]:
    """
    BoundReports along a time axis.

    Args:
        sigma: Constant width or a callable σ(t)
    """
    reports = []
    for t in np.asarray(t_axis, dtype=float):
        s = float(sigma(t)) if callable(sigma) else float(sigma)
        reports.append(bound_report(context_at(model, float(t), s, params.delta, params.rho), params))
    n_invalid = sum(any(b is None for b in r.bd1) for r in reports)
    if n_invalid:
        logger.warning("bounds invalid at %d of %d times (2Res/A above %.4f)", n_invalid, len(reports), B0_GAUSSIAN)
    n_failed = sum(not r.passed for r in reports)
    if n_failed:
        logger.info("hypotheses fail at %d of %d times", n_failed, len(reports))
    return reports
