import numpy as np
import pytest

from core.models import SeparationParams
from core.presets import load_preset
from core.signal_model import build_model, make_lfm, model_from_dict, sample


@pytest.fixture
def two_lfm_model():
    return model_from_dict(load_preset("two-lfm")["model"])


@pytest.fixture
def radar_model():
    return model_from_dict(load_preset("radar")["model"])


@pytest.fixture
def two_tone_model():
    """Constant tones at 100 and 200 Hz, far enough apart for every bound hypothesis at sigma = 1."""
    span = (0.0, 16.0)
    return build_model([make_lfm(1.0, 100.0, 0.0, span), make_lfm(1.0, 200.0, 0.0, span)])


@pytest.fixture
def two_tone_signal(two_tone_model):
    return sample(two_tone_model, 512.0)


@pytest.fixture
def two_tone_params():
    return SeparationParams(threshold=0.3, rho=1.0, delta=30.0, expected_components=2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
