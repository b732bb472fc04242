"""
Experiment presets and run configuration.

Loads the two bundled experiments from JSON files under config.DATA_DIR,
falling back to built-in copies when a file is missing, and resolves a
RunConfig from preset < config file < command-line overrides.
"""
import copy
import json
import logging
import math
import os
from typing import Any, Dict, Optional, Tuple

from pydantic import ValidationError

import config
from core.chirplet import SigmaSchedule, make_grid
from core.errors import InvalidArgumentError
from core.models import CubeGrid, RunConfig, SampledSignal, SeparationParams, SignalModel
from core.signal_model import model_from_dict

logger = logging.getLogger(__name__)

PRESET_NAMES = tuple(config.PRESET_FILES)


def _default_presets() -> Dict[str, Dict[str, Any]]:
    """
    Built-in copies of the bundled preset files.

    Returns:
        Dictionary of preset name to {"model": ..., "run": ...}
    """
    depth = 30.0 / math.pi
    return {
        "two-lfm": {
            "model": {
                "t_span": [0.0, 8.0],
                "components": [
                    {"kind": "lfm", "amplitude": 1.0, "c": 42.0, "r": -4.0},
                    {"kind": "lfm", "amplitude": 1.0, "c": 10.0, "r": 4.0},
                ],
            },
            "run": {
                "sample_rate": 128.0, "sigma": config.DEFAULT_SIGMA, "t_range": [0.0, 8.0], "t_step": 1 / 16,
                "eta_min": 0.0, "eta_max": 64.0, "lambda_range": [-10.0, 10.0], "lambda_step": 0.25,
                "threshold_frac": config.DEFAULT_THRESHOLD_FRACTION, "delta": 0.5, "k": 2, "trend": False,
                "eval_interval": [1.0, 7.0],
            },
        },
        "radar": {
            "model": {
                "t_span": [0.0, 1.0],
                "components": [
                    {"kind": "sfm", "amplitude": 1.0, "f0": 250.0, "depth": depth, "mod_freq": 3.0},
                    {"kind": "sfm", "amplitude": 1.0, "f0": 250.0, "depth": -depth, "mod_freq": 3.0},
                    {"kind": "lfm", "amplitude": 1.0, "c": 250.0, "r": 0.0},
                ],
            },
            "run": {
                "sample_rate": 2048.0, "sigma": config.DEFAULT_SIGMA, "t_range": [0.25, 0.75], "t_step": 1 / 64,
                "eta_min": 0.0, "eta_max": 500.0, "lambda_range": [-4000.0, 4000.0], "lambda_step": 40.0,
                "threshold_frac": config.DEFAULT_THRESHOLD_FRACTION, "delta": 20.0, "k": 3, "trend": False,
                "eval_interval": [0.3, 0.7],
            },
        },
    }


def _read_json(file_path: str) -> Dict[str, Any]:
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidArgumentError(f"cannot read {file_path}: {e}") from e


def load_preset(name: str, file_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load a preset definition.

    Args:
        name: "two-lfm" or "radar"
        file_path: JSON file to read (defaults to config.PRESET_FILES[name])

    Returns:
        Dictionary with "model" and "run" sections; missing sections come
        from the built-in copy

    Raises:
        InvalidArgumentError: on an unknown preset name
    """
    defaults = _default_presets()
    if name not in defaults:
        raise InvalidArgumentError(f"unknown preset {name!r}; expected one of {sorted(defaults)}")
    preset = copy.deepcopy(defaults[name])
    file_path = file_path or config.PRESET_FILES.get(name)

    # If the file doesn't exist, the built-in copy is used as is
    if not file_path or not os.path.exists(file_path):
        logger.debug("preset file for %s not found, using built-in definition", name)
        return preset

    saved = _read_json(file_path)
    if "model" in saved:
        preset["model"] = saved["model"]
    preset["run"].update(saved.get("run", {}))
    return preset


def load_model(file_path: str) -> SignalModel:
    """Signal model from a JSON definition file."""
    data = _read_json(file_path)
    # preset-style files nest the model
    return model_from_dict(data.get("model", data))


def resolve_run(
    preset: Optional[str] = None,
    config_file: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> Tuple[RunConfig, SignalModel]:
    """
    Merge preset defaults, a JSON config file and explicit overrides.

    Later sources win; None-valued overrides are ignored. The signal model
    comes from model_file when one is set, otherwise from the preset.

    Raises:
        InvalidArgumentError: if the merged configuration is invalid
    """
    file_values = _read_json(config_file) if config_file else {}
    # config files may name the model file the way the command line does
    if isinstance(file_values.get("model"), str):
        file_values["model_file"] = file_values.pop("model")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    name = overrides.get("preset") or file_values.get("preset") or preset

    merged: Dict[str, Any] = {"out": config.OUTPUT_DIR}
    model_dict = None
    if name:
        definition = load_preset(name)
        merged.update(definition["run"])
        model_dict = definition["model"]
        merged["preset"] = name
    merged.update(file_values)
    merged.update(overrides)

    try:
        run = RunConfig(**merged)
    except ValidationError as e:
        raise InvalidArgumentError(f"invalid run configuration: {e}") from e

    model = load_model(run.model_file) if run.model_file else model_from_dict(model_dict)
    logger.info("resolved run: preset=%s model_file=%s components=%d", run.preset, run.model_file,
                len(model.components))
    return run, model


def separation_params(run: RunConfig) -> SeparationParams:
    """SeparationParams of a run; ρ defaults to the largest window width."""
    rho = run.rho if run.rho is not None else SigmaSchedule(run.sigma).maximum
    try:
        return SeparationParams(
            threshold=run.threshold_frac, threshold_mode="fraction", rho=rho,
            delta=run.delta, expected_components=run.k, trend=run.trend,
        )
    except ValidationError as e:
        raise InvalidArgumentError(str(e)) from e


def transform_grid(run: RunConfig, signal: SampledSignal) -> CubeGrid:
    return make_grid(
        signal,
        SigmaSchedule(run.sigma),
        eta_range=(run.eta_min, run.eta_max),
        lambda_range=run.lambda_range,
        lambda_step=run.lambda_step,
        t_range=run.t_range,
        t_step=run.t_step,
    )
