"""
Configuration file for the chirplet separation toolkit.

Contains constants, numerical defaults and environment variable handling.
Configuration priority:
1. Environment variables (.env file) - for local tuning
2. Default values

All configuration can be overridden via environment variables in a .env file.
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file (if present)
load_dotenv()


def _get_config(key: str, default: str = "") -> str:
    """
    Get configuration value with priority: Environment variables > Default.

    Args:
        key: Configuration key name
        default: Default value if not found

    Returns:
        Configuration value as string
    """
    return os.getenv(key, default)


def _get_float(key: str, default: float) -> float:
    return float(_get_config(key, str(default)))


def _get_int(key: str, default: int) -> int:
    return int(_get_config(key, str(default)))


# ============================================================================
# Window / Quadrature Configuration
# ============================================================================
# Gaussian truncation in units of the window width; tail mass beyond 6 is < 1e-8
WINDOW_TRUNCATION_RADIUS = _get_float("CT3S_TRUNCATION_RADIUS", 6.0)

# N_fft is the next power of two >= FFT_OVERSAMPLE x window sample count
FFT_OVERSAMPLE = _get_int("CT3S_FFT_OVERSAMPLE", 4)

# Quadrature step (window units) for the stand-alone polynomial Fourier transform
PFT_QUADRATURE_STEP = _get_float("CT3S_PFT_STEP", 0.01)

# ============================================================================
# Separation Defaults
# ============================================================================
DEFAULT_SIGMA = _get_float("CT3S_SIGMA", 0.15)  # seconds, as in both experiments
DEFAULT_THRESHOLD_FRACTION = _get_float("CT3S_THRESHOLD_FRACTION", 0.3)

# ============================================================================
# Execution Configuration
# ============================================================================
MAX_WORKERS = _get_int("CT3S_MAX_WORKERS", os.cpu_count() or 1)
# Cubes above this size are refused rather than allocated
CUBE_MEMORY_LIMIT_MB = _get_float("CT3S_CUBE_MEMORY_LIMIT_MB", 2048.0)
# Number of chirp rates transformed per FFT batch
LAMBDA_BATCH = _get_int("CT3S_LAMBDA_BATCH", 32)

LOG_LEVEL = _get_config("CT3S_LOG_LEVEL", "INFO")

# ============================================================================
# Data Storage Configuration
# ============================================================================
DATA_DIR = _get_config("CT3S_DATA_DIR", os.path.join(os.path.dirname(os.path.abspath(__file__)), "data"))
OUTPUT_DIR = _get_config("CT3S_OUTPUT_DIR", "output")
PRESET_FILES = {
    "two-lfm": os.path.join(DATA_DIR, "two_lfm.json"),
    "radar": os.path.join(DATA_DIR, "radar.json"),
}
