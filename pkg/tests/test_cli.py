import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner
from pytest import approx

from app import main
from core.errors import SeparationError
from core.processors import SeparationProcessor

TONES = {
    "t_span": [0.0, 16.0],
    "components": [
        {"kind": "lfm", "amplitude": 1.0, "c": 100.0, "r": 0.0},
        {"kind": "lfm", "amplitude": 1.0, "c": 200.0, "r": 0.0},
    ],
}
TONE_FLAGS = [
    "--rate", "512", "--sigma", "1", "--eta-min", "50", "--eta-max", "250", "--lambda-range", "-2", "2",
    "--lambda-step", "0.5", "--delta", "30", "--rho", "1", "--k", "2", "--t-range", "7.5", "8.5", "--t-step", "0.5",
]


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def tones_file(tmp_path):
    path = tmp_path / "tones.json"
    path.write_text(json.dumps(TONES), encoding="utf-8")
    return str(path)


def tone_args(command, tones_file, out):
    return [command, "--model", tones_file, *TONE_FLAGS, "--out", str(out)]


@pytest.mark.parametrize("preset, n_samples", [("two-lfm", 1025), ("radar", 2049)])
def test_synth_presets(runner, tmp_path, preset, n_samples):
    result = runner.invoke(main, ["synth", "--preset", preset, "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    signal = pd.read_csv(tmp_path / "signal.csv")
    assert len(signal) == n_samples
    truth = pd.read_csv(tmp_path / "truth.csv")
    assert set(truth["component"]) == set(range(2 if preset == "two-lfm" else 3))


def test_synth_model_file(runner, tmp_path):
    model = tmp_path / "tone.json"
    model.write_text(json.dumps({"t_span": [0.0, 1.0],
                                 "components": [{"kind": "lfm", "amplitude": 1.0, "c": 10.0, "r": 0.0}]}))
    args = ["synth", "--model", str(model), "--rate", "64", "--eta-max", "30", "--lambda-range", "-2", "2",
            "--lambda-step", "1", "--delta", "1", "--k", "1", "--out", str(tmp_path)]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    signal = pd.read_csv(tmp_path / "signal.csv")
    assert len(signal) == 65
    assert signal["re"].to_numpy() == approx(np.cos(2 * np.pi * 10 * signal["t"].to_numpy()), abs=1e-9)


def test_synth_is_deterministic(runner, tmp_path):
    for name in ("a", "b"):
        result = runner.invoke(main, ["synth", "--preset", "two-lfm", "--out", str(tmp_path / name)])
        assert result.exit_code == 0, result.output
    assert (tmp_path / "a" / "signal.csv").read_bytes() == (tmp_path / "b" / "signal.csv").read_bytes()


@pytest.mark.parametrize("args", [
    ["synth", "--preset", "chirp"],
    ["synth", "--preset", "two-lfm", "--sigma", "-1"],
    ["synth"],
])
def test_invalid_configuration_exits_2(runner, tmp_path, args):
    result = runner.invoke(main, [*args, "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_pft(runner, tmp_path):
    result = runner.invoke(main, ["pft", "--eta", "0", "--lam", "0.5", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    data = json.loads((tmp_path / "pft.json").read_text())
    assert complex(data["re"], data["im"]) == approx((1 + 1j * np.pi) ** -0.5)
    assert data["modulus"] == approx(data["closed_modulus"])


def test_admissibility(runner, tmp_path):
    result = runner.invoke(main, ["admissibility", "--step", "0.05", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    data = json.loads((tmp_path / "admissibility.json").read_text())
    assert data["passed"] is True
    assert data["n_points"] == 101 * 101


def test_admissibility_rejects_level(runner, tmp_path):
    result = runner.invoke(main, ["admissibility", "--b", "0.5", "--step", "0.5", "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_transform_writes_cube_and_slice(runner, tmp_path, tones_file):
    result = runner.invoke(main, [*tone_args("transform", tones_file, tmp_path), "--slice-t", "8"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "cube.bin").exists()
    plane = pd.read_csv(tmp_path / "slice_t8.csv")
    best = plane.loc[plane["abs"].idxmax()]
    assert best["lambda"] == 0.0
    assert best["eta"] in (100.0, 200.0)


def test_ridges(runner, tmp_path, tones_file):
    result = runner.invoke(main, tone_args("ridges", tones_file, tmp_path))
    assert result.exit_code == 0, result.output
    ridges = pd.read_csv(tmp_path / "ridges.csv")
    assert sorted(set(ridges["eta_hat"])) == [100.0, 200.0]
    assert set(ridges["flag"]) == {"ok"}


def test_separate_then_bounds(runner, tmp_path, tones_file):
    result = runner.invoke(main, tone_args("separate", tones_file, tmp_path))
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["status"] == "ok"
    assert len(summary["components"]) == 2
    assert all(c["n_certified"] == 3 for c in summary["certificates"])
    assert (tmp_path / "recovered_0.csv").exists() and (tmp_path / "recovered_1.csv").exists()

    result = runner.invoke(main, tone_args("bounds", tones_file, tmp_path))
    assert result.exit_code == 0, result.output
    bounds = json.loads((tmp_path / "bounds.json").read_text())
    assert len(bounds["reports"]) == 3
    assert all(r["passed"] for r in bounds["reports"])
    assert bounds["observed"] == summary["certificates"]
    assert len(pd.read_csv(tmp_path / "bounds.csv")) == 3


def test_bounds_without_a_passing_time_exits_3(runner, tmp_path):
    result = runner.invoke(main, ["bounds", "--preset", "two-lfm", "--out", str(tmp_path)])
    assert result.exit_code == 3
    bounds = json.loads((tmp_path / "bounds.json").read_text())
    assert not any(r["passed"] for r in bounds["reports"])
    assert "observed" not in bounds


def test_empty_separation_exits_3(runner, tmp_path, tones_file, monkeypatch):
    def nothing_found(self, signal, grid):
        raise SeparationError("every threshold set was empty")

    monkeypatch.setattr(SeparationProcessor, "process_signal", nothing_found)
    result = runner.invoke(main, tone_args("separate", tones_file, tmp_path))
    assert result.exit_code == 3
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["status"] == "empty"


@pytest.mark.slow
def test_separate_two_lfm_preset(runner, tmp_path):
    args = ["separate", "--preset", "two-lfm", "--eval-interval", "1", "3", "--out", str(tmp_path)]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert sorted(c["component"] for c in summary["components"]) == [0, 1]


def test_synth_writes_a_reusable_model(runner, tmp_path, tones_file):
    result = runner.invoke(main, tone_args("synth", tones_file, tmp_path / "a"))
    assert result.exit_code == 0, result.output
    model = json.loads((tmp_path / "a" / "model.json").read_text())
    assert model["t_span"] == [0.0, 16.0]
    assert [c["c"] for c in model["components"]] == [100.0, 200.0]

    result = runner.invoke(main, tone_args("synth", str(tmp_path / "a" / "model.json"), tmp_path / "b"))
    assert result.exit_code == 0, result.output
    assert (tmp_path / "a" / "signal.csv").read_bytes() == (tmp_path / "b" / "signal.csv").read_bytes()


def test_separate_reads_an_existing_signal(runner, tmp_path, tones_file):
    result = runner.invoke(main, tone_args("synth", tones_file, tmp_path / "synth"))
    assert result.exit_code == 0, result.output
    signal_file = str(tmp_path / "synth" / "signal.csv")

    result = runner.invoke(main, [*tone_args("separate", tones_file, tmp_path / "run"), "--signal", signal_file])
    assert result.exit_code == 0, result.output
    assert not (tmp_path / "run" / "signal.csv").exists()
    summary = json.loads((tmp_path / "run" / "summary.json").read_text())
    assert summary["status"] == "ok"
    assert all(c["max_if_error"] == 0.0 for c in summary["components"])


def test_signal_at_another_rate_exits_2(runner, tmp_path, tones_file):
    result = runner.invoke(main, tone_args("synth", tones_file, tmp_path / "synth"))
    assert result.exit_code == 0, result.output
    args = [*tone_args("separate", tones_file, tmp_path / "run"), "--rate", "256",
            "--signal", str(tmp_path / "synth" / "signal.csv")]
    result = runner.invoke(main, args)
    assert result.exit_code == 2
    assert not (tmp_path / "run" / "summary.json").exists()


def test_separate_is_deterministic(runner, tmp_path, tones_file):
    for name in ("a", "b"):
        result = runner.invoke(main, tone_args("separate", tones_file, tmp_path / name))
        assert result.exit_code == 0, result.output
    for artifact in ("ridges.csv", "recovered_0.csv", "recovered_1.csv", "summary.json"):
        assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()


CROSSOVER_FLAGS = [
    "--preset", "two-lfm", "--rate", "128", "--sigma", "1", "--eta-min", "15", "--eta-max", "37",
    "--lambda-range", "-8", "8", "--lambda-step", "0.5", "--t-range", "3", "5", "--t-step", "0.25",
    "--threshold-frac", "0.5", "--delta", "1", "--rho", "1", "--eval-interval", "3", "5",
]


def test_summary_errors_match_the_exported_tables(runner, tmp_path):
    result = runner.invoke(main, ["separate", *CROSSOVER_FLAGS, "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "summary.json").read_text())
    ridges = pd.read_csv(tmp_path / "ridges.csv")
    truth = pd.read_csv(tmp_path / "truth.csv")
    assert len(summary["components"]) == 2

    for entry in summary["components"]:
        slot = entry["slot"]
        recovered = pd.read_csv(tmp_path / f"recovered_{slot}.csv").drop(columns="component")
        rows = ridges[ridges["component"] == slot].drop(columns="component").merge(recovered, on="t")
        rows = rows.merge(truth[truth["component"] == entry["component"]], on="t")
        rows = rows[(rows["flag"] != "gap") & (rows["t"] >= 3.0) & (rows["t"] <= 5.0)]
        assert len(rows) == summary["n_times"]
        assert entry["max_if_error"] == approx((rows["eta_hat"] - rows["if"]).abs().max(), rel=1e-9, abs=1e-12)
        assert entry["max_chirp_rate_error"] == approx(
            (rows["lambda_hat"] - rows["chirp_rate"]).abs().max(), rel=1e-9, abs=1e-12)
        assert entry["max_amplitude_error"] == approx(
            (rows["amp"] - rows["amplitude"]).abs().max(), rel=1e-9, abs=1e-12)
