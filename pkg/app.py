"""
Chirplet separation toolkit - command-line entry point.

Synthesizes the bundled experiments (or a model file), computes the chirplet
transform, extracts and tracks ridges, recovers the components and reports
the Gaussian-window error bounds. Every artifact is written as CSV/JSON (and
a binary cube) under the output directory.
"""
import functools
import logging
import math
import os
from contextlib import contextmanager
from typing import Any, Dict, Optional

import click
import numpy as np

import config
from core import storage
from core.bounds import bound_curves
from core.chirplet import nearest_index
from core.errors import CT3SError, SeparationError
from core.models import WindowSpec
from core.presets import PRESET_NAMES, resolve_run, separation_params, transform_grid
from core.processors import SeparationProcessor
from core.signal_model import model_to_dict, sample
from core.window import B0_GAUSSIAN, check_admissibility, pft_modulus, pft_value

logger = logging.getLogger(__name__)

EXIT_INVALID = 2
EXIT_SOFT_FAILURE = 3
# Relative mismatch allowed between a signal file's rate and the run's
RATE_TOLERANCE = 1e-9


class InvalidConfigError(click.ClickException):
    """Bad flags, config file or model: nothing was computed."""
    exit_code = EXIT_INVALID


class SoftFailure(click.ClickException):
    """The computation ran but its mathematical outcome is a failure; outputs may be partial."""
    exit_code = EXIT_SOFT_FAILURE


@contextmanager
def _cli_errors():
    try:
        yield
    except SeparationError as e:
        raise SoftFailure(str(e)) from e
    except (CT3SError, ValueError) as e:
        raise InvalidConfigError(str(e)) from e
    except OSError as e:
        raise InvalidConfigError(f"cannot write outputs: {e}") from e


def _run_options(func):
    """Flags shared by every experiment subcommand."""
    options = [
        click.option("--preset", type=click.Choice(PRESET_NAMES), default=None, help="Bundled experiment"),
        click.option("--model", "model_file", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Signal model JSON file"),
        click.option("--signal", "signal_file", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="signal.csv to analyse instead of sampling the model"),
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="JSON file mirroring these flags; flags override it"),
        click.option("--rate", "sample_rate", type=float, default=None, help="Sample rate in Hz"),
        click.option("--sigma", type=float, default=None, help="Constant window width in seconds"),
        click.option("--t-range", type=(float, float), default=None, help="Transform time range"),
        click.option("--t-step", type=float, default=None, help="Transform time step in seconds"),
        click.option("--eta-min", type=float, default=None, help="Lowest frequency in Hz"),
        click.option("--eta-max", type=float, default=None, help="Highest frequency in Hz"),
        click.option("--lambda-range", type=(float, float), default=None, help="Chirp-rate range in Hz/s"),
        click.option("--lambda-step", type=float, default=None, help="Chirp-rate step in Hz/s"),
        click.option("--threshold-frac", type=float, default=None, help="Threshold as a fraction of each plane's max"),
        click.option("--rho", type=float, default=None, help="Chirp-rate weight of the distance (s); default sigma"),
        click.option("--delta", type=float, default=None, help="Cluster separation in Hz"),
        click.option("--k", type=int, default=None, help="Expected number of oscillatory components"),
        click.option("--trend/--no-trend", default=None, help="Whether the signal carries a trend"),
        click.option("--eval-interval", type=(float, float), default=None, help="Interval errors are scored on"),
        click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory"),
        click.option("--progress", is_flag=True, default=False, help="Show transform progress"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _resolve(kwargs: Dict[str, Any]):
    overrides = dict(kwargs)
    overrides.pop("progress", None)
    overrides.pop("signal_file", None)
    config_file = overrides.pop("config_file", None)
    run, model = resolve_run(config_file=config_file, overrides=overrides)
    storage.ensure_dir(run.out)
    logger.info("writing outputs to %s", os.path.abspath(run.out))
    return run, model


def _synthesize(run, model, signal_file: Optional[str] = None):
    """Sample the model into signal.csv, or reuse an existing signal.csv; truth.csv either way."""
    if signal_file is None:
        signal = sample(model, run.sample_rate)
        storage.write_signal_csv(signal, os.path.join(run.out, "signal.csv"))
        logger.info("synthesized %d samples at %g Hz", signal.n_samples, signal.sample_rate)
    else:
        signal = storage.read_signal_csv(signal_file)
        if abs(signal.sample_rate - run.sample_rate) > RATE_TOLERANCE * run.sample_rate:
            raise InvalidConfigError(
                f"{signal_file} is sampled at {signal.sample_rate:.9g} Hz, the run expects {run.sample_rate:g} Hz"
            )
        logger.info("read %d samples from %s", signal.n_samples, signal_file)
    storage.write_truth_csv(model, signal.times, os.path.join(run.out, "truth.csv"))
    return signal


def _experiment(func):
    @functools.wraps(func)
    def wrapper(**kwargs):
        with _cli_errors():
            return func(**kwargs)
    return _run_options(wrapper)


@click.group()
@click.option("--log-level", default=config.LOG_LEVEL, show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def main(log_level: str):
    """
    Chirplet-transform separation of multi-component signals.

    The subcommands run successive stages of the pipeline:
    1. synth: sample the model and write its ground truth
    2. transform: chirplet cube of the sampled signal
    3. ridges: tracked cluster maxima of the cube
    4. separate: ridges, recovered components and an error summary
    5. bounds: error-bound curves and hypothesis margins
    """
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@main.command()
@_experiment
def synth(**kwargs):
    """Write signal.csv, truth.csv and model.json."""
    run, model = _resolve(kwargs)
    _synthesize(run, model, kwargs["signal_file"])
    storage.write_json(model_to_dict(model), os.path.join(run.out, "model.json"))


@main.command()
@click.option("--slice-t", type=float, default=None, help="Also write the (eta, lambda) plane nearest this t")
@_experiment
def transform(slice_t: Optional[float], **kwargs):
    """Write the chirplet cube (cube.bin) and optionally one plane as CSV."""
    run, model = _resolve(kwargs)
    signal = _synthesize(run, model, kwargs["signal_file"])
    processor = SeparationProcessor(separation_params(run), progress=kwargs["progress"])
    cube = processor.transform(signal, transform_grid(run, signal))
    storage.write_cube(cube, os.path.join(run.out, "cube.bin"))
    if slice_t is not None:
        index = nearest_index(cube.grid.t_axis, slice_t)
        storage.write_slice_csv(cube, index, os.path.join(run.out, f"slice_t{cube.grid.t_axis[index]:.6g}.csv"))


@main.command()
@_experiment
def ridges(**kwargs):
    """Write the tracked ridges (ridges.csv)."""
    run, model = _resolve(kwargs)
    signal = _synthesize(run, model, kwargs["signal_file"])
    processor = SeparationProcessor(separation_params(run), progress=kwargs["progress"])
    cube = processor.transform(signal, transform_grid(run, signal))
    ridge = processor.extract_ridges(cube)
    storage.write_ridges_csv(ridge, os.path.join(run.out, "ridges.csv"))
    click.echo(f"{ridge.n_components} ridges over {ridge.t_axis.size} times")


@main.command()
@_experiment
def separate(**kwargs):
    """Separate the signal: ridges.csv, recovered_<k>.csv and summary.json."""
    run, model = _resolve(kwargs)
    signal = _synthesize(run, model, kwargs["signal_file"])
    processor = SeparationProcessor(separation_params(run), progress=kwargs["progress"])
    grid = transform_grid(run, signal)

    try:
        result = processor.process_signal(signal, grid)
    except SeparationError as e:
        storage.write_json({"status": "empty", "error": str(e)}, os.path.join(run.out, "summary.json"))
        raise

    storage.write_ridges_csv(result.ridge, os.path.join(run.out, "ridges.csv"))
    storage.write_recovered_csvs(result.components, run.out)
    summary = processor.evaluate(result, model, run.eval_interval)
    storage.write_json(summary, os.path.join(run.out, "summary.json"))

    for entry in summary["components"]:
        click.echo(
            f"component {entry['component']} (slot {entry['slot']}): "
            f"max IF error {entry['max_if_error']} Hz, relative l2 error {entry['relative_l2_error']:.4g}"
        )
    if summary["status"] != "ok":
        click.echo(f"status {summary['status']}: {'; '.join(summary['reasons'])}", err=True)


@main.command()
@_experiment
def bounds(**kwargs):
    """Write bounds.json and bounds.csv over the evaluation interval."""
    run, model = _resolve(kwargs)
    params = separation_params(run)
    signal = sample(model, run.sample_rate)
    grid = transform_grid(run, signal)
    t_axis = grid.t_axis
    if run.eval_interval is not None:
        lo, hi = run.eval_interval
        t_axis = t_axis[(t_axis >= lo - 1e-12) & (t_axis <= hi + 1e-12)]

    reports = bound_curves(model, t_axis, params, grid.sigma)
    payload: Dict[str, Any] = {"params": params, "delta_eta": grid.delta_eta,
                               "delta_lambda": grid.delta_lambda, "reports": reports}
    summary_path = os.path.join(run.out, "summary.json")
    if os.path.exists(summary_path):
        payload["observed"] = storage.read_json(summary_path).get("certificates")
    storage.write_json(payload, os.path.join(run.out, "bounds.json"))
    storage.write_bound_curves_csv(reports, os.path.join(run.out, "bounds.csv"))

    n_passed = sum(r.passed for r in reports)
    click.echo(f"hypotheses hold at {n_passed} of {len(reports)} times")
    if reports and n_passed == 0:
        raise SoftFailure("the bound hypotheses fail at every evaluated time")


@main.command()
@click.option("--eta", type=float, required=True, help="Dimensionless frequency argument")
@click.option("--lam", type=float, required=True, help="Dimensionless chirp argument")
@click.option("--numeric", is_flag=True, default=False, help="Use quadrature instead of the closed form")
@click.option("--out", type=click.Path(file_okay=False), default=config.OUTPUT_DIR, show_default=True)
def pft(eta: float, lam: float, numeric: bool, out: str):
    """Polynomial Fourier transform of the Gaussian window at one point (pft.json)."""
    with _cli_errors():
        value = pft_value(eta, lam, numeric=numeric)
        payload = {"eta": value.eta, "lam": value.lam, "re": value.value.real, "im": value.value.imag,
                   "modulus": abs(value.value), "closed_modulus": float(pft_modulus(eta, lam))}
        storage.write_json(payload, os.path.join(out, "pft.json"))
        click.echo(f"g({eta}, {lam}) = {value.value.real:.12g} {value.value.imag:+.12g}i")


@main.command()
@click.option("--b", "level", type=float, default=B0_GAUSSIAN, show_default=True)
@click.option("--eta-max", type=float, default=5.0, show_default=True)
@click.option("--lambda-max", type=float, default=5.0, show_default=True)
@click.option("--step", type=float, default=0.01, show_default=True)
@click.option("--numeric", is_flag=True, default=False, help="Check the quadrature transform")
@click.option("--out", type=click.Path(file_okay=False), default=config.OUTPUT_DIR, show_default=True)
def admissibility(level: float, eta_max: float, lambda_max: float, step: float, numeric: bool, out: str):
    """Check the admissibility conditions of the Gaussian on a grid (admissibility.json)."""
    with _cli_errors():
        if not (step > 0 and eta_max > 0 and lambda_max > 0):
            raise InvalidConfigError("grid limits and step must be positive")
        eta_grid = np.arange(int(math.floor(eta_max / step + 1e-9)) + 1) * step
        lambda_grid = np.arange(int(math.floor(lambda_max / step + 1e-9)) + 1) * step
        window = WindowSpec(truncation_radius=config.WINDOW_TRUNCATION_RADIUS)
        report = check_admissibility(window, level, eta_grid, lambda_grid, numeric=numeric)
        storage.write_json(report, os.path.join(out, "admissibility.json"))
    click.echo(f"admissibility {'passed' if report.passed else 'failed'} on {report.n_points} points")
    if not report.passed:
        raise SoftFailure("the window is not admissible at this level")


if __name__ == "__main__":
    main()
