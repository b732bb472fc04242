"""
Analytic multi-component AM-FM signals.

Generators for linear chirps (LFM), sinusoidal FM tones and trends,
pointwise evaluation, uniform sampling and the ground-truth amplitude,
IF and chirp-rate curves that the separation results are compared against.
"""
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from core.errors import DomainError, InvalidArgumentError
from core.models import ComponentSpec, SampledSignal, SignalModel

logger = logging.getLogger(__name__)

# Relative slack when checking that t lies in a span
_SPAN_TOL = 1e-9


def _check_span(span: Sequence[float]) -> Tuple[float, float]:
    t0, t1 = float(span[0]), float(span[1])
    if not (math.isfinite(t0) and math.isfinite(t1) and t1 > t0):
        raise InvalidArgumentError(f"span must be a finite increasing interval, got {span}")
    return t0, t1


def _envelope(amplitude: float, am_depth: float, am_freq: float):
    """A(t) = a(1 + m cos 2πf_a t) and its relative Lipschitz constant ε₁."""
    if not amplitude > 0:
        raise InvalidArgumentError(f"amplitude must be positive, got {amplitude}")
    if not 0.0 <= am_depth < 1.0:
        raise InvalidArgumentError(f"am_depth must lie in [0, 1), got {am_depth}")
    if am_freq < 0:
        raise InvalidArgumentError(f"am_freq must be non-negative, got {am_freq}")

    if am_depth == 0.0 or am_freq == 0.0:
        def envelope(t):
            return np.full(np.shape(t), amplitude * (1.0 + am_depth), dtype=float)
        return envelope, 0.0

    def envelope(t):
        return amplitude * (1.0 + am_depth * np.cos(2.0 * np.pi * am_freq * np.asarray(t, dtype=float)))

    # |A(t+τ) - A(t)| <= a·m·2πf_a·|τ| and A(t) >= a(1 - m)
    return envelope, 2.0 * np.pi * am_freq * am_depth / (1.0 - am_depth)


def _check_positive_if(phase_d1, span: Tuple[float, float], label: str) -> None:
    grid = np.linspace(span[0], span[1], 257)
    if np.min(phase_d1(grid)) <= 0.0:
        raise InvalidArgumentError(f"{label}: instantaneous frequency must stay positive on {span}")


def make_lfm(amplitude: float, c: float, r: float, span: Sequence[float],
             am_depth: float = 0.0, am_freq: float = 0.0) -> ComponentSpec:
    """
    Linear chirp A e^{i2π(ct + rt²/2)}.

    Args:
        amplitude: Carrier amplitude (positive)
        c: Frequency at t = 0, Hz
        r: Chirp rate, Hz/s
        span: Time interval the component lives on
        am_depth, am_freq: Optional cosine amplitude modulation

    Returns:
        ComponentSpec with IF c + rt and constant chirp rate r
    """
    span = _check_span(span)
    envelope, eps1 = _envelope(amplitude, am_depth, am_freq)

    def phase(t):
        t = np.asarray(t, dtype=float)
        return c * t + 0.5 * r * t * t

    def phase_d1(t):
        return c + r * np.asarray(t, dtype=float)

    def phase_d2(t):
        return np.full(np.shape(t), float(r))

    _check_positive_if(phase_d1, span, "lfm")
    return ComponentSpec(
        kind="lfm", amplitude=envelope, phase=phase, phase_d1=phase_d1, phase_d2=phase_d2,
        phase_d3_sup=0.0, amplitude_lipschitz_rel=eps1, span=span,
        params={"amplitude": float(amplitude), "c": float(c), "r": float(r),
                "am_depth": float(am_depth), "am_freq": float(am_freq)},
    )


def make_sfm(amplitude: float, f0: float, depth: float, mod_freq: float, span: Sequence[float],
             am_depth: float = 0.0, am_freq: float = 0.0) -> ComponentSpec:
    """
    Sinusoidal FM tone with phase f0·t - depth·sin(2π·mod_freq·t).

    The IF is the derivative of that phase, f0 - 2π·mod_freq·depth·cos(2π·mod_freq·t).
    A negative depth flips the modulation sign.
    """
    if not mod_freq > 0:
        raise InvalidArgumentError(f"mod_freq must be positive, got {mod_freq}")
    span = _check_span(span)
    envelope, eps1 = _envelope(amplitude, am_depth, am_freq)
    w = 2.0 * np.pi * mod_freq

    def phase(t):
        t = np.asarray(t, dtype=float)
        return f0 * t - depth * np.sin(w * t)

    def phase_d1(t):
        return f0 - w * depth * np.cos(w * np.asarray(t, dtype=float))

    def phase_d2(t):
        return w * w * depth * np.sin(w * np.asarray(t, dtype=float))

    _check_positive_if(phase_d1, span, "sfm")
    return ComponentSpec(
        kind="sfm", amplitude=envelope, phase=phase, phase_d1=phase_d1, phase_d2=phase_d2,
        phase_d3_sup=float(w ** 3 * abs(depth)), amplitude_lipschitz_rel=eps1, span=span,
        params={"amplitude": float(amplitude), "f0": float(f0), "depth": float(depth),
                "mod_freq": float(mod_freq), "am_depth": float(am_depth), "am_freq": float(am_freq)},
    )


def make_trend(amplitude: float, span: Sequence[float]) -> ComponentSpec:
    """Constant trend A₀ written as a component with φ₀ ≡ 0."""
    span = _check_span(span)
    envelope, _ = _envelope(amplitude, 0.0, 0.0)

    def zero(t):
        return np.zeros(np.shape(t))

    return ComponentSpec(
        kind="trend", amplitude=envelope, phase=zero, phase_d1=zero, phase_d2=zero,
        phase_d3_sup=0.0, amplitude_lipschitz_rel=0.0, span=span,
        params={"amplitude": float(amplitude)},
    )


def build_model(components: Sequence[ComponentSpec], t_span: Optional[Sequence[float]] = None) -> SignalModel:
    """
    Assemble a SignalModel, defaulting the span to the first component's span.

    Raises:
        InvalidArgumentError: if the components do not form a valid model
    """
    if not components:
        raise InvalidArgumentError("a signal model needs at least one component")
    span = _check_span(t_span if t_span is not None else components[0].span)
    try:
        return SignalModel(components=tuple(components), t_span=span)
    except ValidationError as e:
        raise InvalidArgumentError(str(e)) from e


def _check_in_span(model: SignalModel, t: np.ndarray) -> None:
    t0, t1 = model.t_span
    slack = _SPAN_TOL * max(1.0, abs(t0), abs(t1))
    if np.any(t < t0 - slack) or np.any(t > t1 + slack):
        raise DomainError(f"t outside the model span {model.t_span}")


def component_values(model: SignalModel, t) -> np.ndarray:
    """x_k(t) for every component, shape (n_components, len(t))."""
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    _check_in_span(model, tt)
    out = np.empty((len(model.components), tt.size), dtype=complex)
    for k, comp in enumerate(model.components):
        if comp.is_trend:
            out[k] = comp.amplitude(tt)
        else:
            out[k] = comp.amplitude(tt) * np.exp(2j * np.pi * comp.phase(tt))
    return out


def evaluate(model: SignalModel, t):
    """
    Evaluate x(t) = Σ_k A_k(t) e^{i2πφ_k(t)}.

    Args:
        model: Signal model
        t: Scalar time or array of times (seconds)

    Returns:
        Complex scalar for scalar t, complex array otherwise

    Raises:
        DomainError: if any t lies outside the model span
    """
    values = component_values(model, t).sum(axis=0)
    if np.ndim(t) == 0:
        return complex(values[0])
    return values.reshape(np.shape(t))


def sample_times(model: SignalModel, rate: float) -> np.ndarray:
    if not rate > 0:
        raise InvalidArgumentError(f"sample rate must be positive, got {rate}")
    t0, t1 = model.t_span
    count = int(math.floor((t1 - t0) * rate + 1e-9)) + 1
    return t0 + np.arange(count) / rate


def sample(model: SignalModel, rate: float) -> SampledSignal:
    """
    Sample a model uniformly from the start of its span.

    Returns:
        SampledSignal with floor((t1 - t0)·rate) + 1 samples
    """
    times = sample_times(model, rate)
    signal = SampledSignal(samples=evaluate(model, times), sample_rate=float(rate), t_start=model.t_span[0])
    logger.debug("sampled %d points at %g Hz", signal.n_samples, rate)
    return signal


def ground_truth(model: SignalModel, t: float) -> List[Tuple[float, float, float]]:
    """(A_k, φ′_k, φ″_k) per component at t, in model order."""
    amps, d1, d2 = ground_truth_curves(model, [t])
    return [(float(a), float(f), float(r)) for a, f, r in zip(amps[:, 0], d1[:, 0], d2[:, 0])]


def ground_truth_curves(model: SignalModel, times) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Amplitude, IF and chirp-rate curves, each shaped (n_components, len(times))."""
    tt = np.atleast_1d(np.asarray(times, dtype=float))
    _check_in_span(model, tt)
    shape = (len(model.components), tt.size)
    amps, d1, d2 = np.empty(shape), np.empty(shape), np.empty(shape)
    for k, comp in enumerate(model.components):
        amps[k] = comp.amplitude(tt)
        d1[k] = comp.phase_d1(tt)
        d2[k] = comp.phase_d2(tt)
    return amps, d1, d2


# ============================================================================
# Model definition files
# ============================================================================
_BUILDERS = {
    "lfm": (make_lfm, ("amplitude", "c", "r"), ("am_depth", "am_freq")),
    "sfm": (make_sfm, ("amplitude", "f0", "depth", "mod_freq"), ("am_depth", "am_freq")),
    "trend": (make_trend, ("amplitude",), ()),
}


def model_from_dict(data: Dict[str, Any]) -> SignalModel:
    """
    Build a model from {"components": [{"kind": ..., params...}], "t_span": [t0, t1]}.

    Raises:
        InvalidArgumentError: on unknown kinds or missing parameters
    """
    try:
        span = _check_span(data["t_span"])
        items = data["components"]
    except (KeyError, TypeError, IndexError) as e:
        raise InvalidArgumentError(f"model definition needs 'components' and 't_span': {e}") from e

    components = []
    for item in items:
        kind = item.get("kind")
        if kind not in _BUILDERS:
            raise InvalidArgumentError(f"unknown component kind {kind!r}; expected one of {sorted(_BUILDERS)}")
        builder, required, optional = _BUILDERS[kind]
        missing = [name for name in required if name not in item]
        if missing:
            raise InvalidArgumentError(f"{kind} component is missing {missing}")
        kwargs = {name: float(item[name]) for name in optional if name in item}
        components.append(builder(*(float(item[name]) for name in required), span, **kwargs))
    # trend first, whatever order the file lists it in
    components.sort(key=lambda c: not c.is_trend)
    return build_model(components, span)


def model_to_dict(model: SignalModel) -> Dict[str, Any]:
    return {
        "components": [{"kind": c.kind, **c.params} for c in model.components],
        "t_span": list(model.t_span),
    }
