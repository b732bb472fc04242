"""
Adaptive chirplet transform.

Q_x(t, η, λ) = ∫ x(t+τ) (1/σ(t)) g(τ/σ(t)) e^{-i2πητ - iπλτ²} dτ, discretized
with the trapezoidal rule on the signal's own sample grid. For every (t, λ)
the windowed, chirp-demodulated segment goes through one zero-padded DFT,
which yields every η on the bin grid Δη = rate/N_fft at once. The STFT is
the λ = 0 slice; P_x, the transform of the local LFM model, is the oracle
the discrete transform is tested against.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy import fft as sp_fft
from tqdm import tqdm

import config
from core.errors import DomainError, GridError, InvalidArgumentError
from core.models import CubeGrid, SampledSignal, SignalModel, TransformCube, WindowSpec
from core.signal_model import component_values, ground_truth_curves
from core.window import default_window, gauss, pft_closed

logger = logging.getLogger(__name__)

_AXIS_TOL = 1e-9
# Complex128 entries
_BYTES_PER_VALUE = 16

SigmaSpec = Union[float, Sequence[Tuple[float, float]], Callable]


class SigmaSchedule:
    """
    Window width σ(t): a constant or a table of (t, σ) rows interpolated linearly.

    Outside the table range the end values are held.
    """

    def __init__(self, spec: Union[float, Sequence[Tuple[float, float]]]):
        if isinstance(spec, (int, float)):
            if not spec > 0:
                raise InvalidArgumentError(f"sigma must be positive, got {spec}")
            self.constant: Optional[float] = float(spec)
            self.table: Optional[np.ndarray] = None
        else:
            table = np.asarray(spec, dtype=float)
            if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
                raise InvalidArgumentError("a sigma table needs >= 2 rows of (t, sigma)")
            if np.any(np.diff(table[:, 0]) <= 0) or np.any(table[:, 1] <= 0):
                raise InvalidArgumentError("sigma table times must increase and values must be positive")
            self.constant = None
            self.table = table

    @classmethod
    def coerce(cls, sigma: SigmaSpec) -> Callable:
        if isinstance(sigma, cls) or (callable(sigma) and not isinstance(sigma, (int, float))):
            return sigma
        return cls(sigma)

    def __call__(self, t):
        if self.constant is not None:
            if np.ndim(t) == 0:
                return self.constant
            return np.full(np.shape(t), self.constant)
        value = np.interp(t, self.table[:, 0], self.table[:, 1])
        return float(value) if np.ndim(value) == 0 else value

    @property
    def maximum(self) -> float:
        return self.constant if self.constant is not None else float(self.table[:, 1].max())

    def to_spec(self) -> Union[float, list]:
        return self.constant if self.constant is not None else self.table.tolist()

    def __repr__(self) -> str:
        return f"SigmaSchedule({self.to_spec()!r})"


def _uniform_axis(lo: float, hi: float, step: float, name: str) -> np.ndarray:
    if not step > 0:
        raise GridError(f"{name} step must be positive, got {step}")
    if not hi > lo:
        raise GridError(f"{name} range must be increasing, got ({lo}, {hi})")
    count = int(math.floor((hi - lo) / step + _AXIS_TOL)) + 1
    if count < 2:
        raise GridError(f"{name} axis needs at least 2 points")
    return lo + np.arange(count) * step


def _check_t_axis(signal: SampledSignal, t_axis: np.ndarray) -> None:
    slack = _AXIS_TOL * max(1.0, abs(signal.t_start), abs(signal.t_end))
    if t_axis[0] < signal.t_start - slack or t_axis[-1] > signal.t_end + slack:
        raise DomainError(
            f"t axis [{t_axis[0]}, {t_axis[-1]}] exceeds the signal span [{signal.t_start}, {signal.t_end}]"
        )


def fft_length(sigma_max: float, sample_rate: float, radius: float, oversample: int) -> int:
    """Next power of two >= oversample x the longest window segment."""
    half = int(math.ceil(radius * sigma_max * sample_rate))
    return 1 << int(math.ceil(math.log2(max(2, oversample * (2 * half + 1)))))


def make_grid(
    signal: SampledSignal,
    sigma: SigmaSpec,
    eta_range: Tuple[float, float],
    lambda_range: Tuple[float, float],
    lambda_step: float,
    t_range: Optional[Tuple[float, float]] = None,
    t_step: Optional[float] = None,
    window: Optional[WindowSpec] = None,
    oversample: Optional[int] = None,
) -> CubeGrid:
    """
    Build a CubeGrid whose η axis lies on the DFT bins of the transform.

    Args:
        signal: Signal the grid will be applied to
        sigma: Constant width, (t, σ) table or callable
        eta_range: (η_min, η_max) in Hz; snapped inward to bin multiples
        lambda_range: (λ_min, λ_max) in Hz/s
        lambda_step: λ spacing in Hz/s
        t_range: Defaults to the whole signal span
        t_step: Defaults to the sample step

    Raises:
        DomainError: if the t axis leaves the signal span
        GridError: on malformed axes or η beyond Nyquist
        InvalidArgumentError: if the cube would exceed config.CUBE_MEMORY_LIMIT_MB
    """
    window = window or default_window()
    oversample = oversample or config.FFT_OVERSAMPLE
    schedule = SigmaSchedule.coerce(sigma)

    t_lo, t_hi = t_range if t_range is not None else (signal.t_start, signal.t_end)
    t_axis = _uniform_axis(t_lo, t_hi, t_step or signal.step, "t")
    _check_t_axis(signal, t_axis)

    sigma_max = float(np.max([schedule(t) for t in t_axis]))
    n_fft = fft_length(sigma_max, signal.sample_rate, window.truncation_radius, oversample)
    delta_eta = signal.sample_rate / n_fft

    eta_lo, eta_hi = eta_range
    nyquist = 0.5 * signal.sample_rate
    if eta_lo < -nyquist - _AXIS_TOL or eta_hi > nyquist + _AXIS_TOL:
        raise GridError(f"eta range ({eta_lo}, {eta_hi}) exceeds the Nyquist band ±{nyquist}")
    k_lo = int(math.ceil(eta_lo / delta_eta - _AXIS_TOL))
    k_hi = int(math.floor(eta_hi / delta_eta + _AXIS_TOL))
    if k_hi - k_lo < 1:
        raise GridError(f"eta range ({eta_lo}, {eta_hi}) holds fewer than 2 bins of width {delta_eta}")
    eta_bins = np.arange(k_lo, k_hi + 1)

    lambda_axis = _uniform_axis(lambda_range[0], lambda_range[1], lambda_step, "lambda")

    size_mb = t_axis.size * eta_bins.size * lambda_axis.size * _BYTES_PER_VALUE / 2 ** 20
    if size_mb > config.CUBE_MEMORY_LIMIT_MB:
        raise InvalidArgumentError(
            f"cube of {t_axis.size}x{eta_bins.size}x{lambda_axis.size} needs {size_mb:.0f} MB, "
            f"above the {config.CUBE_MEMORY_LIMIT_MB:.0f} MB limit"
        )

    try:
        grid = CubeGrid(
            t_axis=t_axis, eta_axis=eta_bins * delta_eta, lambda_axis=lambda_axis, eta_bins=eta_bins,
            sigma=schedule, sample_rate=signal.sample_rate, n_fft=n_fft,
        )
    except ValidationError as e:
        raise GridError(str(e)) from e
    logger.debug("grid %s, N_fft=%d, delta_eta=%g Hz", grid.shape, n_fft, delta_eta)
    return grid


def _segment(signal: SampledSignal, t: float, sigma: float, radius: float) -> Tuple[np.ndarray, np.ndarray, bool]:
    """
    Lags τ_n = t_n - t inside the truncated window, trapezoid-weighted windowed samples
    and whether the support was clipped by the signal span.
    """
    if not sigma > 0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    h = signal.step
    start = (t - signal.t_start) / h
    reach = radius * sigma / h
    lo = int(math.ceil(start - reach - _AXIS_TOL))
    hi = int(math.floor(start + reach + _AXIS_TOL))
    clipped = lo < 0 or hi > signal.n_samples - 1
    lo, hi = max(lo, 0), min(hi, signal.n_samples - 1)
    if hi < lo:
        raise DomainError(f"t={t} has no samples inside its window")

    idx = np.arange(lo, hi + 1)
    tau = signal.t_start + idx * h - t
    weights = np.full(idx.size, h)
    if idx.size > 1:
        weights[0] = weights[-1] = 0.5 * h
    windowed = weights * gauss(tau / sigma) / sigma * signal.samples[lo:hi + 1]
    return tau, windowed, clipped


def chirplet_plane(
    signal: SampledSignal,
    t: float,
    sigma: float,
    eta_bins: np.ndarray,
    lambda_axis: np.ndarray,
    n_fft: int,
    window: Optional[WindowSpec] = None,
    batch: Optional[int] = None,
) -> Tuple[np.ndarray, bool]:
    """
    One (η, λ) plane of Q_x at time t by the DFT fast path.

    Returns:
        (plane indexed (η, λ), True if the window support was clipped)

    Raises:
        GridError: if the window segment is longer than n_fft
    """
    window = window or default_window()
    batch = batch or config.LAMBDA_BATCH
    tau, windowed, clipped = _segment(signal, t, sigma, window.truncation_radius)
    if tau.size > n_fft:
        raise GridError(f"window segment of {tau.size} samples exceeds N_fft={n_fft}")

    eta_bins = np.asarray(eta_bins, dtype=np.int64)
    eta = eta_bins * (signal.sample_rate / n_fft)
    # the DFT is taken from the first lag, not from t
    shift = np.exp(-2j * np.pi * eta * tau[0])
    columns = np.mod(eta_bins, n_fft)
    tau_sq = tau * tau

    lambda_axis = np.asarray(lambda_axis, dtype=float)
    plane = np.empty((eta_bins.size, lambda_axis.size), dtype=complex)
    for start in range(0, lambda_axis.size, batch):
        lams = lambda_axis[start:start + batch]
        demod = windowed * np.exp(-1j * np.pi * np.outer(lams, tau_sq))
        spectrum = sp_fft.fft(demod, n=n_fft, axis=-1)
        plane[:, start:start + lams.size] = (spectrum[:, columns] * shift).T
    return plane, clipped


def chirplet_cube(
    signal: SampledSignal,
    grid: CubeGrid,
    window: Optional[WindowSpec] = None,
    max_workers: Optional[int] = None,
    progress: bool = False,
) -> TransformCube:
    """
    Q_x on every (t, η, λ) of a grid.

    Planes are independent, so they are computed concurrently, each by exactly
    one worker writing its own t slice.

    Args:
        signal: Sampled signal
        grid: Grid from make_grid (its rate must match the signal's)
        window: Window spec; defaults to the configured Gaussian
        max_workers: Thread count, defaults to config.MAX_WORKERS
        progress: Show a tqdm bar over the t axis

    Returns:
        Immutable TransformCube
    """
    window = window or default_window()
    if not math.isclose(grid.sample_rate, signal.sample_rate, rel_tol=1e-12):
        raise GridError(f"grid rate {grid.sample_rate} differs from signal rate {signal.sample_rate}")
    _check_t_axis(signal, grid.t_axis)

    sigmas = grid.sigma_values()
    values = np.empty(grid.shape, dtype=complex)
    flags = np.zeros(grid.t_axis.size, dtype=bool)
    logger.info("computing chirplet cube %s (N_fft=%d)", grid.shape, grid.n_fft)

    def work(i: int) -> int:
        values[i], flags[i] = chirplet_plane(
            signal, float(grid.t_axis[i]), float(sigmas[i]), grid.eta_bins, grid.lambda_axis, grid.n_fft, window
        )
        return i

    workers = max(1, max_workers or config.MAX_WORKERS)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(work, i) for i in range(grid.t_axis.size)]
        for future in tqdm(as_completed(futures), total=len(futures), desc="chirplet", disable=not progress):
            future.result()

    values.setflags(write=False)
    flags.setflags(write=False)
    if flags.any():
        logger.debug("%d of %d planes have clipped window support", int(flags.sum()), flags.size)
    return TransformCube(grid=grid, values=values, boundary_flags=flags)


def chirplet_value(
    signal: SampledSignal,
    t: float,
    eta: float,
    lam: float,
    sigma: float,
    window: Optional[WindowSpec] = None,
) -> complex:
    """Q_x(t, η, λ) by direct quadrature at an arbitrary point."""
    window = window or default_window()
    if not (signal.t_start - _AXIS_TOL <= t <= signal.t_end + _AXIS_TOL):
        raise DomainError(f"t={t} outside the signal span [{signal.t_start}, {signal.t_end}]")
    tau, windowed, _ = _segment(signal, t, sigma, window.truncation_radius)
    return complex(np.sum(windowed * np.exp(-2j * np.pi * eta * tau - 1j * np.pi * lam * tau * tau)))


def stft(signal: SampledSignal, grid: CubeGrid, window: Optional[WindowSpec] = None) -> np.ndarray:
    """
    V_x(t, η), the λ = 0 slice of the chirplet transform, shaped (t, η).

    The grid's λ axis is ignored.
    """
    window = window or default_window()
    _check_t_axis(signal, grid.t_axis)
    sigmas = grid.sigma_values()
    out = np.empty((grid.t_axis.size, grid.eta_axis.size), dtype=complex)
    for i, t in enumerate(grid.t_axis):
        plane, _ = chirplet_plane(signal, float(t), float(sigmas[i]), grid.eta_bins, np.zeros(1), grid.n_fft, window)
        out[i] = plane[:, 0]
    return out


def p_oracle(model: SignalModel, t: float, eta, lam, sigma: float):
    """
    P_x(t, η, λ) = Σ_k x_k(t) ğ(σ(η - φ′_k(t)), σ²(λ - φ″_k(t))).

    Broadcasts over η and λ.

    Raises:
        DomainError: if t lies outside the model span
    """
    if not sigma > 0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    xk = component_values(model, t)[:, 0]
    _, d1, d2 = ground_truth_curves(model, t)
    eta = np.asarray(eta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    total = np.zeros(np.broadcast(eta, lam).shape, dtype=complex)
    for k in range(xk.size):
        total = total + xk[k] * pft_closed(sigma * (eta - d1[k, 0]), sigma ** 2 * (lam - d2[k, 0]))
    return complex(total) if total.ndim == 0 else total


def oracle_plane(model: SignalModel, t: float, eta_axis, lambda_axis, sigma: float) -> np.ndarray:
    """P_x over an (η, λ) plane, indexed like a cube slice."""
    E, L = np.meshgrid(np.asarray(eta_axis, dtype=float), np.asarray(lambda_axis, dtype=float), indexing="ij")
    return p_oracle(model, t, E, L, sigma)


def slice_plane(cube: TransformCube, t_index: int) -> np.ndarray:
    """Read-only (η, λ) view of the cube at one t index."""
    n = cube.grid.t_axis.size
    if not 0 <= int(t_index) < n:
        raise GridError(f"t index {t_index} out of range [0, {n})")
    view = cube.values[int(t_index)]
    view.flags.writeable = False
    return view


def nearest_index(axis: np.ndarray, value: float) -> int:
    """Index of the axis point closest to value; ties go to the lower index."""
    return int(np.argmin(np.abs(np.asarray(axis) - value)))
