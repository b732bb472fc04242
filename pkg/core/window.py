"""
Gaussian window kernel.

The unit-width Gaussian g(t) = e^{-t²/2}/√(2π), its order-2 polynomial
Fourier transform ğ(η, λ) = ∫ g(τ) e^{-i2πητ - iπλτ²} dτ in closed and
numeric form, the absolute moments I_n and the companion functions β, γ
that make g an admissible window.
"""
import logging
import math
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_function

import config
from core.errors import InvalidArgumentError
from core.models import AdmissibilityReport, PFTValue, WindowSpec

logger = logging.getLogger(__name__)

SQRT_2PI = math.sqrt(2.0 * math.pi)
# Decay constant of |ğ| for the Gaussian
DECAY_CONSTANT = 2.0 ** 0.25 / math.sqrt(math.pi)
# Largest b for which the Gaussian's β, γ satisfy the admissibility implication
B0_GAUSSIAN = 1.0 - math.exp(-0.25)
SYMMETRY_TOLERANCE = 1e-12

_PFT_CHUNK = 4096


def default_window() -> WindowSpec:
    return WindowSpec(truncation_radius=config.WINDOW_TRUNCATION_RADIUS)


def gauss(t):
    """Unit Gaussian density; scalar in, scalar out."""
    t = np.asarray(t, dtype=float)
    value = np.exp(-0.5 * t * t) / SQRT_2PI
    return float(value) if value.ndim == 0 else value


def _scalar_or_array(value):
    return value.item() if np.ndim(value) == 0 else value


def pft_closed(eta, lam):
    """
    Closed-form ğ(η, λ) = (1 + i2πλ)^{-1/2} e^{-2π²η²/(1 + i2πλ)}.

    The principal square root is continuous here since Re(1 + i2πλ) = 1.
    Broadcasts over array arguments.
    """
    eta = np.asarray(eta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    z = 1.0 + 2j * np.pi * lam
    return _scalar_or_array(np.exp(-2.0 * np.pi ** 2 * eta * eta / z) / np.sqrt(z))


def pft_modulus(eta, lam):
    """f(|η|, |λ|) = γ(λ)·exp(-2π²η²/(1 + 4π²λ²)), the modulus of ğ."""
    eta = np.abs(np.asarray(eta, dtype=float))
    lam = np.abs(np.asarray(lam, dtype=float))
    q = 1.0 + 4.0 * np.pi ** 2 * lam * lam
    return _scalar_or_array(q ** -0.25 * np.exp(-2.0 * np.pi ** 2 * eta * eta / q))


def pft_envelope(eta, lam):
    """min{(2π²η²)^{-1/4}, γ(λ)}, the envelope |ğ| never exceeds."""
    eta = np.abs(np.asarray(eta, dtype=float))
    lam = np.abs(np.asarray(lam, dtype=float))
    with np.errstate(divide="ignore"):
        eta_part = np.where(eta > 0.0, (2.0 * np.pi ** 2 * eta * eta) ** -0.25, np.inf)
    return _scalar_or_array(np.minimum(eta_part, (1.0 + 4.0 * np.pi ** 2 * lam * lam) ** -0.25))


def decay_level(rho: float = 1.0) -> float:
    """L = max{2^{1/4}, √ρ}/√π, the decay constant under the ρ-weighted distance."""
    if not rho > 0:
        raise InvalidArgumentError(f"rho must be positive, got {rho}")
    return max(DECAY_CONSTANT, math.sqrt(rho / math.pi))


def decay_bound(eta, lam, rho: float = 1.0):
    """L/√(|η| + ρ|λ|) with L = decay_level(ρ); infinite at the origin."""
    level = decay_level(rho)
    dist = np.abs(np.asarray(eta, dtype=float)) + rho * np.abs(np.asarray(lam, dtype=float))
    with np.errstate(divide="ignore"):
        return _scalar_or_array(np.where(dist > 0.0, level / np.sqrt(dist), np.inf))


def pft_numeric(window: Optional[WindowSpec], eta, lam):
    """
    Trapezoidal quadrature of ğ(η, λ) over the truncated window support.

    Args:
        window: Window spec; quadrature_step defaults to config.PFT_QUADRATURE_STEP
        eta, lam: Dimensionless arguments (scalars or broadcastable arrays)

    Returns:
        Complex scalar or array shaped like the broadcast arguments
    """
    window = window or default_window()
    step = window.quadrature_step or config.PFT_QUADRATURE_STEP
    half = int(math.ceil(window.truncation_radius / step))
    tau = np.arange(-half, half + 1) * step
    weights = gauss(tau)

    eta_b, lam_b = np.broadcast_arrays(np.asarray(eta, dtype=float), np.asarray(lam, dtype=float))
    flat_eta, flat_lam = eta_b.ravel(), lam_b.ravel()
    out = np.empty(flat_eta.size, dtype=complex)
    for start in range(0, flat_eta.size, _PFT_CHUNK):
        e = flat_eta[start:start + _PFT_CHUNK, None]
        lm = flat_lam[start:start + _PFT_CHUNK, None]
        kernel = np.exp(-2j * np.pi * e * tau - 1j * np.pi * lm * tau * tau)
        out[start:start + _PFT_CHUNK] = integrate.trapezoid(weights * kernel, dx=step, axis=-1)
    return _scalar_or_array(out.reshape(eta_b.shape))


def pft_value(eta: float, lam: float, window: Optional[WindowSpec] = None, numeric: bool = False) -> PFTValue:
    value = pft_numeric(window, eta, lam) if numeric else pft_closed(eta, lam)
    return PFTValue(value=complex(value), eta=float(eta), lam=float(lam))


@lru_cache(maxsize=None)
def moment(n: int) -> float:
    """I_n = ∫|g(t) tⁿ| dt by adaptive quadrature over the whole line."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"moment order must be a positive integer, got {n}")
    half, _ = integrate.quad(lambda t: gauss(t) * t ** n, 0.0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2.0 * half


def moment_closed(n: int) -> float:
    """2^{n/2} Γ((n+1)/2)/√π."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"moment order must be a positive integer, got {n}")
    return float(2.0 ** (n / 2.0) * gamma_function((n + 1) / 2.0) / math.sqrt(math.pi))


def _non_negative(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise InvalidArgumentError(f"{name} must be non-negative, got {value}")
    return arr


def _unit_interval(xi) -> np.ndarray:
    arr = np.asarray(xi, dtype=float)
    if np.any(~(arr > 0.0)) or np.any(arr > 1.0):
        raise InvalidArgumentError(f"xi must lie in (0, 1], got {xi}")
    return arr


def beta(eta):
    """β(η) = e^{-2π²η²} for η >= 0."""
    eta = _non_negative(eta, "eta")
    return _scalar_or_array(np.exp(-2.0 * np.pi ** 2 * eta * eta))


def gamma(lam):
    """γ(λ) = (1 + 4π²λ²)^{-1/4} for λ >= 0."""
    lam = _non_negative(lam, "lambda")
    return _scalar_or_array((1.0 + 4.0 * np.pi ** 2 * lam * lam) ** -0.25)


def beta_inv(xi):
    xi = _unit_interval(xi)
    return _scalar_or_array(np.sqrt(-np.log(xi)) / (np.pi * math.sqrt(2.0)))


def gamma_inv(xi):
    xi = _unit_interval(xi)
    return _scalar_or_array(np.sqrt(1.0 - xi ** 4) / (2.0 * np.pi * xi * xi))


def check_admissibility(
    window: Optional[WindowSpec],
    b: float,
    eta_grid: Sequence[float],
    lambda_grid: Sequence[float],
    transform: Optional[Callable] = None,
    beta_fn: Callable = beta,
    gamma_fn: Callable = gamma,
    constant: float = DECAY_CONSTANT,
    b_max: float = B0_GAUSSIAN,
    max_examples: int = 20,
    numeric: bool = False,
) -> AdmissibilityReport:
    """
    Check the admissibility conditions on a grid of non-negative (η, λ).

    Verifies at every grid point:
      (a) |ğ(η, λ)| <= C/√(|η| + |λ|) away from the origin
      (b) |ğ| is unchanged when η or λ flips sign (tolerance 1e-12)
      (c) |ğ(η, λ)| >= 1 - b implies β(η) >= 1 - b and γ(λ) >= 1 - b

    Args:
        window: Window spec for the numeric transform
        b: Level in [0, b_max]
        eta_grid, lambda_grid: Non-negative axes; the checked grid is their product
        transform: ğ as a callable of (η, λ); defaults to the Gaussian closed form
        max_examples: Cap on counterexamples kept per condition
        numeric: Use quadrature of the window instead of the closed form

    Raises:
        InvalidArgumentError: if b lies outside [0, b_max]
    """
    if not 0.0 <= b <= b_max:
        raise InvalidArgumentError(f"b must lie in [0, {b_max:.6f}], got {b}")
    if transform is None:
        transform = (lambda e, lm: pft_numeric(window, e, lm)) if numeric else pft_closed
    eta = _non_negative(eta_grid, "eta grid")
    lam = _non_negative(lambda_grid, "lambda grid")
    E, L = np.meshgrid(eta, lam, indexing="ij")

    modulus = np.abs(transform(E, L))

    dist = E + L
    with np.errstate(divide="ignore"):
        bound = np.where(dist > 0.0, constant / np.sqrt(dist), np.inf)
    decay_bad = np.argwhere(modulus > bound)

    flips = [np.abs(transform(-E, L)), np.abs(transform(E, -L)), np.abs(transform(-E, -L))]
    sym_gap = np.max([np.abs(f - modulus) for f in flips], axis=0)
    sym_bad = np.argwhere(sym_gap > SYMMETRY_TOLERANCE)

    level = 1.0 - b
    inside = modulus >= level
    companion_ok = (beta_fn(E) >= level - SYMMETRY_TOLERANCE) & (gamma_fn(L) >= level - SYMMETRY_TOLERANCE)
    mono_bad = np.argwhere(inside & ~companion_ok)

    report = AdmissibilityReport(
        b=float(b),
        constant=float(constant),
        n_points=int(E.size),
        decay_violations=[(float(E[i, j]), float(L[i, j]), float(modulus[i, j]), float(bound[i, j]))
                          for i, j in decay_bad[:max_examples]],
        symmetry_violations=[(float(E[i, j]), float(L[i, j]), float(sym_gap[i, j]))
                             for i, j in sym_bad[:max_examples]],
        monotone_violations=[(float(E[i, j]), float(L[i, j]), float(modulus[i, j]))
                             for i, j in mono_bad[:max_examples]],
        n_decay_violations=len(decay_bad),
        n_symmetry_violations=len(sym_bad),
        n_monotone_violations=len(mono_bad),
    )
    if not report.passed:
        logger.warning(
            "admissibility failed at b=%g: %d decay, %d symmetry, %d companion violations",
            b, report.n_decay_violations, report.n_symmetry_violations, report.n_monotone_violations,
        )
    return report
