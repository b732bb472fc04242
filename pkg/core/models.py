"""
Data models for the chirplet separation toolkit.

Defines the core data structures: signal components and models, sampled
signals, window and transform grids, ridges, recovered components and the
error-bound records.
"""
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

TimeFunction = Callable[[Any], Any]


def _frozen_array(value, dtype, ndim: int) -> np.ndarray:
    arr = np.array(value, dtype=dtype)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-D array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class ComponentSpec(BaseModel):
    """One AM-FM component A(t)e^{i2πφ(t)}; the trend has φ ≡ 0."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: Literal["lfm", "sfm", "trend"]
    amplitude: TimeFunction
    phase: TimeFunction  # cycles
    phase_d1: TimeFunction  # Hz
    phase_d2: TimeFunction  # Hz/s
    phase_d3_sup: float = Field(ge=0.0)  # Hz/s^2
    amplitude_lipschitz_rel: float = Field(default=0.0, ge=0.0)  # 1/s
    span: Tuple[float, float]
    params: Dict[str, float] = Field(default_factory=dict)

    @property
    def is_trend(self) -> bool:
        return self.kind == "trend"


class SignalModel(BaseModel):
    """Analytic multi-component signal; a trend, if any, sits at index 0."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    components: Tuple[ComponentSpec, ...]
    t_span: Tuple[float, float]

    @model_validator(mode="after")
    def _check_components(self):
        t0, t1 = self.t_span
        if not (np.isfinite(t0) and np.isfinite(t1) and t1 > t0):
            raise ValueError(f"t_span must be a finite increasing interval, got {self.t_span}")
        trends = [i for i, c in enumerate(self.components) if c.is_trend]
        if len(trends) > 1 or (trends and trends[0] != 0):
            raise ValueError("at most one trend component is allowed and it must come first")
        if len(trends) == len(self.components):
            raise ValueError("a signal model needs at least one non-trend component")
        return self

    @property
    def has_trend(self) -> bool:
        return self.components[0].is_trend

    @property
    def n_oscillatory(self) -> int:
        """K, the number of non-trend components."""
        return len(self.components) - int(self.has_trend)


class SampledSignal(BaseModel):
    """Uniformly sampled complex signal."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    samples: np.ndarray
    sample_rate: float = Field(gt=0.0)
    t_start: float = 0.0

    @field_validator("samples", mode="before")
    @classmethod
    def _as_complex(cls, value):
        arr = _frozen_array(value, complex, 1)
        if arr.size < 2:
            raise ValueError("a sampled signal needs at least 2 samples")
        return arr

    @property
    def step(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def n_samples(self) -> int:
        return int(self.samples.size)

    @property
    def times(self) -> np.ndarray:
        return self.t_start + np.arange(self.n_samples) / self.sample_rate

    @property
    def t_end(self) -> float:
        return self.t_start + (self.n_samples - 1) / self.sample_rate


class WindowSpec(BaseModel):
    """Window shape and the truncation/quadrature used to integrate against it."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["gaussian"] = "gaussian"
    truncation_radius: float = Field(default=6.0, gt=0.0)  # window units
    quadrature_step: Optional[float] = Field(default=None, gt=0.0)  # window units


class PFTValue(BaseModel):
    """Polynomial Fourier transform ğ(η, λ) of the window at one point."""
    value: complex
    eta: float
    lam: float


class AdmissibilityReport(BaseModel):
    b: float
    constant: float
    n_points: int
    decay_violations: List[Tuple[float, float, float, float]] = Field(default_factory=list)
    symmetry_violations: List[Tuple[float, float, float]] = Field(default_factory=list)
    monotone_violations: List[Tuple[float, float, float]] = Field(default_factory=list)
    n_decay_violations: int = 0
    n_symmetry_violations: int = 0
    n_monotone_violations: int = 0

    @computed_field
    @property
    def passed(self) -> bool:
        return not (self.n_decay_violations or self.n_symmetry_violations or self.n_monotone_violations)


class CubeGrid(BaseModel):
    """
    Sampling of (t, η, λ) for the chirplet transform.

    The η axis sits on DFT bins: Δη = sample_rate / n_fft, and eta_bins holds
    the (possibly negative) bin number of every η value.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    t_axis: np.ndarray
    eta_axis: np.ndarray
    lambda_axis: np.ndarray
    eta_bins: np.ndarray
    sigma: TimeFunction
    sample_rate: float = Field(gt=0.0)
    n_fft: int = Field(gt=1)

    @field_validator("t_axis", "eta_axis", "lambda_axis", mode="before")
    @classmethod
    def _uniform_axis(cls, value):
        arr = _frozen_array(value, float, 1)
        if arr.size < 2:
            raise ValueError("every axis needs at least 2 points")
        steps = np.diff(arr)
        if np.any(steps <= 0):
            raise ValueError("axes must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
            raise ValueError("axes must be uniformly spaced")
        return arr

    @field_validator("eta_bins", mode="before")
    @classmethod
    def _int_bins(cls, value):
        return _frozen_array(value, np.int64, 1)

    @model_validator(mode="after")
    def _bins_match_axis(self):
        if self.eta_bins.size != self.eta_axis.size:
            raise ValueError("eta_bins and eta_axis differ in length")
        return self

    @property
    def delta_eta(self) -> float:
        return self.sample_rate / self.n_fft

    @property
    def delta_lambda(self) -> float:
        return float(self.lambda_axis[1] - self.lambda_axis[0])

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.t_axis.size, self.eta_axis.size, self.lambda_axis.size)

    def sigma_values(self) -> np.ndarray:
        return np.array([float(self.sigma(t)) for t in self.t_axis])


class TransformCube(BaseModel):
    """Q_x(t, η, λ) on a CubeGrid, indexed (t, η, λ)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: CubeGrid
    values: np.ndarray
    boundary_flags: np.ndarray

    @model_validator(mode="after")
    def _check_shape(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if self.boundary_flags.shape != (self.grid.t_axis.size,):
            raise ValueError("boundary_flags must hold one flag per t")
        return self


class SeparationParams(BaseModel):
    """Threshold ε̃₁, separation constants ρ and Δ, and the expected component count."""
    model_config = ConfigDict(frozen=True)

    threshold: float = Field(default=0.3, ge=0.0)
    threshold_mode: Literal["fraction", "absolute"] = "fraction"
    rho: float = Field(gt=0.0)  # seconds
    delta: float = Field(gt=0.0)  # Hz
    expected_components: int = Field(ge=1)
    trend: bool = False

    @model_validator(mode="after")
    def _check_fraction(self):
        if self.threshold_mode == "fraction" and not 0.0 < self.threshold < 1.0:
            raise ValueError("a fractional threshold must lie in (0, 1)")
        return self

    @property
    def n_slots(self) -> int:
        return self.expected_components + int(self.trend)


class ThresholdSet(BaseModel):
    """The grid points of one (η, λ) plane whose modulus exceeds the threshold."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    indices: np.ndarray  # (P, 2) eta index, lambda index
    coords: np.ndarray  # (P, 2) eta, lambda
    magnitudes: np.ndarray  # (P,)
    threshold: float

    @property
    def is_empty(self) -> bool:
        return self.indices.shape[0] == 0

    def __len__(self) -> int:
        return int(self.indices.shape[0])


class RidgePeak(BaseModel):
    """Maximum of |Q_x| over one cluster of a plane."""
    eta_index: int
    lambda_index: int
    eta: float
    lam: float
    value: complex

    @property
    def magnitude(self) -> float:
        return abs(self.value)


class RidgeSet(BaseModel):
    """
    Tracked ridges, one row per component slot and one column per t.

    Gaps carry NaN estimates and index -1.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    t_axis: np.ndarray
    eta_hat: np.ndarray
    lambda_hat: np.ndarray
    eta_index: np.ndarray
    lambda_index: np.ndarray
    q_value: np.ndarray
    gap: np.ndarray
    empty_slices: np.ndarray
    excess_slices: np.ndarray
    labels: Tuple[int, ...]

    @property
    def n_components(self) -> int:
        return int(self.eta_hat.shape[0])

    @property
    def coverage(self) -> np.ndarray:
        return ~self.gap


class RecoveredComponent(BaseModel):
    """x_k(t) ≈ Q_x(t, η̂_k(t), λ̂_k(t)) on the cube's t axis."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    component_index: int
    t_axis: np.ndarray
    samples: np.ndarray
    amplitude_estimate: np.ndarray
    missing: np.ndarray


class BoundContext(BaseModel):
    """Everything the Gaussian error bounds need at one instant t."""
    model_config = ConfigDict(frozen=True)

    t: float = 0.0
    epsilon1: float = Field(ge=0.0)  # 1/s
    epsilon3: float = Field(ge=0.0)  # Hz/s^2
    sigma: float = Field(gt=0.0)
    delta: float = Field(gt=0.0)
    rho: float = Field(gt=0.0)
    amplitudes: Tuple[float, ...]
    if_values: Tuple[float, ...]
    cr_values: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_lengths(self):
        n = len(self.amplitudes)
        if n == 0 or len(self.if_values) != n or len(self.cr_values) != n:
            raise ValueError("amplitudes, if_values and cr_values must be non-empty and equally long")
        if min(self.amplitudes) <= 0.0:
            raise ValueError("amplitudes must be positive")
        return self

    @property
    def n(self) -> int:
        return len(self.amplitudes)

    @property
    def mu(self) -> float:
        return min(self.amplitudes)

    @property
    def M(self) -> float:
        return float(sum(self.amplitudes))


class HypothesisCheck(BaseModel):
    name: str
    passed: bool
    margin: float
    detail: str = ""


class BoundReport(BaseModel):
    t: float
    pi: float
    upsilon: float
    upsilon_pairs: List[List[Optional[float]]]
    res: List[float]
    bd1: List[Optional[float]]
    bd2: List[Optional[float]]
    bd3: List[Optional[float]]
    hypotheses: List[HypothesisCheck] = Field(default_factory=list)

    @computed_field
    @property
    def passed(self) -> bool:
        return all(h.passed for h in self.hypotheses)


class RunConfig(BaseModel):
    """Every knob of an experiment run; presets fill all of them."""
    preset: Optional[Literal["two-lfm", "radar"]] = None
    model_file: Optional[str] = None
    sample_rate: float = Field(gt=0.0)
    sigma: Union[float, List[Tuple[float, float]]] = 0.15
    t_range: Optional[Tuple[float, float]] = None
    t_step: Optional[float] = Field(default=None, gt=0.0)
    eta_min: float = 0.0
    eta_max: float
    lambda_range: Tuple[float, float]
    lambda_step: float = Field(gt=0.0)
    threshold_frac: float = Field(default=0.3, gt=0.0, lt=1.0)
    rho: Optional[float] = Field(default=None, gt=0.0)
    delta: float = Field(gt=0.0)
    k: int = Field(ge=1)
    trend: bool = False
    eval_interval: Optional[Tuple[float, float]] = None
    out: str = "output"

    @field_validator("sigma")
    @classmethod
    def _positive_sigma(cls, value):
        if isinstance(value, (int, float)):
            if value <= 0:
                raise ValueError("sigma must be positive")
        else:
            if len(value) < 2 or any(s <= 0 for _, s in value):
                raise ValueError("a sigma table needs >= 2 rows of positive values")
        return value

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.eta_max <= self.eta_min:
            raise ValueError("eta_max must exceed eta_min")
        if self.lambda_range[1] <= self.lambda_range[0]:
            raise ValueError("lambda_range must be increasing")
        if self.model_file is None and self.preset is None:
            raise ValueError("either a preset or a model file is required")
        return self


class SeparationResult(BaseModel):
    """Output of one end-to-end separation run."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    cube: TransformCube
    ridge: RidgeSet
    components: List[RecoveredComponent]
    params: SeparationParams
    n_empty_slices: int = 0
    n_excess_slices: int = 0
