import numpy as np
import pytest
from pytest import approx, mark, raises

import config
from core.chirplet import (
    SigmaSchedule, chirplet_cube, chirplet_plane, chirplet_value, fft_length, make_grid, nearest_index,
    oracle_plane, p_oracle, slice_plane, stft,
)
from core.errors import DomainError, GridError, InvalidArgumentError
from core.models import SampledSignal
from core.signal_model import build_model, make_lfm, sample
from core.window import pft_closed


@pytest.fixture
def two_lfm_signal(two_lfm_model):
    return sample(two_lfm_model, 128.0)


@pytest.fixture
def interior_grid(two_lfm_signal):
    return make_grid(
        two_lfm_signal, 0.15, eta_range=(10.0, 50.0), lambda_range=(-8.0, 8.0), lambda_step=1.0,
        t_range=(2.0, 6.0), t_step=0.5,
    )


def test_fft_length():
    # 6 * 0.15 * 128 = 115.2 -> 233 samples -> 932 -> 1024
    assert fft_length(0.15, 128.0, 6.0, 4) == 1024
    assert fft_length(0.15, 2048.0, 6.0, 4) == 16384


def test_preset_grid(two_lfm_signal):
    grid = make_grid(two_lfm_signal, 0.15, (0.0, 64.0), (-10.0, 10.0), 0.25, t_range=(0.0, 8.0), t_step=1 / 16)
    assert grid.n_fft == 1024
    assert grid.delta_eta == approx(0.125)
    assert grid.delta_lambda == approx(0.25)
    assert grid.shape == (129, 513, 81)
    assert grid.eta_axis[0] == 0.0 and grid.eta_axis[-1] == 64.0


def test_grid_defaults_to_signal_span(two_lfm_signal):
    grid = make_grid(two_lfm_signal, 0.15, (20.0, 30.0), (-1.0, 1.0), 1.0)
    assert grid.t_axis.size == two_lfm_signal.n_samples
    assert grid.t_axis[-1] == approx(8.0)


def test_grid_eta_snaps_to_bins(two_lfm_signal):
    grid = make_grid(two_lfm_signal, 0.15, (10.06, 10.9), (-1.0, 1.0), 1.0, t_range=(4.0, 4.5), t_step=0.5)
    assert grid.eta_axis[0] == approx(10.125)
    assert grid.eta_axis[-1] == approx(10.875)
    assert np.allclose(grid.eta_axis, grid.eta_bins * grid.delta_eta)


def test_grid_rejects_beyond_nyquist(two_lfm_signal):
    with raises(GridError):
        make_grid(two_lfm_signal, 0.15, (0.0, 70.0), (-1.0, 1.0), 1.0)


def test_grid_rejects_bad_axes(two_lfm_signal):
    with raises(GridError):
        make_grid(two_lfm_signal, 0.15, (0.0, 60.0), (1.0, -1.0), 1.0)
    with raises(GridError):
        make_grid(two_lfm_signal, 0.15, (0.0, 60.0), (-1.0, 1.0), 0.0)


def test_grid_rejects_times_outside_signal(two_lfm_signal):
    with raises(DomainError):
        make_grid(two_lfm_signal, 0.15, (0.0, 60.0), (-1.0, 1.0), 1.0, t_range=(7.0, 9.0), t_step=0.5)


def test_grid_memory_limit(two_lfm_signal, monkeypatch):
    monkeypatch.setattr(config, "CUBE_MEMORY_LIMIT_MB", 0.01)
    with raises(InvalidArgumentError):
        make_grid(two_lfm_signal, 0.15, (0.0, 60.0), (-10.0, 10.0), 0.25)


def test_sigma_schedule():
    schedule = SigmaSchedule([(0.0, 0.1), (1.0, 0.3)])
    assert schedule(0.5) == approx(0.2)
    assert schedule(-1.0) == approx(0.1)
    assert schedule(2.0) == approx(0.3)
    assert schedule.maximum == approx(0.3)
    assert SigmaSchedule(0.15)(np.zeros(3)).tolist() == [0.15] * 3
    assert SigmaSchedule.coerce(0.2).to_spec() == 0.2


@mark.parametrize("spec", [0.0, -1.0, [(0.0, 0.1)], [(1.0, 0.1), (0.0, 0.2)], [(0.0, 0.1), (1.0, -0.2)]])
def test_sigma_schedule_rejects(spec):
    with raises(InvalidArgumentError):
        SigmaSchedule(spec)


def test_cube_matches_oracle_for_exact_lfm(two_lfm_model, two_lfm_signal, interior_grid):
    cube = chirplet_cube(two_lfm_signal, interior_grid, max_workers=2)
    worst = 0.0
    for i, t in enumerate(interior_grid.t_axis):
        oracle = oracle_plane(two_lfm_model, t, interior_grid.eta_axis, interior_grid.lambda_axis, 0.15)
        worst = max(worst, float(np.max(np.abs(slice_plane(cube, i) - oracle))))
    assert worst <= 1e-3


def test_cube_matches_oracle_with_sigma_table(two_lfm_model, two_lfm_signal):
    schedule = SigmaSchedule([(2.0, 0.1), (6.0, 0.3)])
    grid = make_grid(two_lfm_signal, schedule, (10.0, 50.0), (-8.0, 8.0), 2.0, t_range=(2.0, 6.0), t_step=1.0)
    cube = chirplet_cube(two_lfm_signal, grid)
    for i, t in enumerate(grid.t_axis):
        oracle = oracle_plane(two_lfm_model, t, grid.eta_axis, grid.lambda_axis, schedule(t))
        assert np.max(np.abs(cube.values[i] - oracle)) <= 1e-3


def test_fast_path_matches_direct_quadrature(two_lfm_signal, interior_grid):
    cube = chirplet_cube(two_lfm_signal, interior_grid)
    for i, j, k in [(0, 0, 0), (4, 128, 4), (8, 320, 16), (3, 17, 9)]:
        direct = chirplet_value(
            two_lfm_signal, interior_grid.t_axis[i], interior_grid.eta_axis[j], interior_grid.lambda_axis[k], 0.15,
        )
        assert cube.values[i, j, k] == approx(direct, rel=1e-9, abs=1e-10)


def test_cube_is_read_only(two_lfm_signal, interior_grid):
    cube = chirplet_cube(two_lfm_signal, interior_grid)
    assert not cube.values.flags.writeable
    with raises(ValueError):
        cube.values[0, 0, 0] = 0.0
    plane = slice_plane(cube, 2)
    assert plane.shape == (interior_grid.eta_axis.size, interior_grid.lambda_axis.size)
    assert not plane.flags.writeable


@mark.parametrize("index", [-1, 9])
def test_slice_out_of_range(two_lfm_signal, interior_grid, index):
    cube = chirplet_cube(two_lfm_signal, interior_grid)
    with raises(GridError):
        slice_plane(cube, index)


def test_boundary_flags(two_lfm_signal):
    grid = make_grid(two_lfm_signal, 0.15, (20.0, 30.0), (-1.0, 1.0), 1.0, t_range=(0.0, 4.0), t_step=0.5)
    cube = chirplet_cube(two_lfm_signal, grid)
    # support reaches 0.9 s either side of t
    assert cube.boundary_flags.tolist() == [True, True, False, False, False, False, False, False, False]


def test_cube_rejects_rate_mismatch(two_lfm_model, interior_grid):
    with raises(GridError):
        chirplet_cube(sample(two_lfm_model, 256.0), interior_grid)


def test_plane_rejects_short_fft(two_lfm_signal):
    with raises(GridError):
        chirplet_plane(two_lfm_signal, 4.0, 0.15, np.arange(3), np.zeros(1), n_fft=128)


def test_stft_is_zero_chirp_slice(two_lfm_signal, interior_grid):
    spectrum = stft(two_lfm_signal, interior_grid)
    assert spectrum.shape == (interior_grid.t_axis.size, interior_grid.eta_axis.size)
    for i, j in [(0, 10), (4, 128), (8, 200)]:
        direct = chirplet_value(two_lfm_signal, interior_grid.t_axis[i], interior_grid.eta_axis[j], 0.0, 0.15)
        assert spectrum[i, j] == approx(direct, rel=1e-9, abs=1e-10)


def test_stft_cannot_split_the_crossover(two_lfm_signal, interior_grid):
    spectrum = np.abs(stft(two_lfm_signal, interior_grid))
    i = nearest_index(interior_grid.t_axis, 4.0)
    # both components leave one merged peak at 26 Hz
    assert interior_grid.eta_axis[np.argmax(spectrum[i])] == approx(26.0, abs=0.25)


def test_chirplet_value_outside_signal(two_lfm_signal):
    with raises(DomainError):
        chirplet_value(two_lfm_signal, 9.0, 26.0, 0.0, 0.15)


def test_p_oracle_at_crossover(two_lfm_model):
    sigma = 0.15
    value = p_oracle(two_lfm_model, 4.0, 26.0, -4.0, sigma)
    # x_1(4) = x_2(4) = 1
    assert value == approx(1.0 + pft_closed(0.0, -8.0 * sigma ** 2))


def test_p_oracle_broadcasts(two_lfm_model):
    plane = oracle_plane(two_lfm_model, 2.0, np.arange(10.0, 20.0), np.arange(-3.0, 4.0), 0.15)
    assert plane.shape == (10, 7)
    assert p_oracle(two_lfm_model, 2.0, 12.0, 0.0, 0.15) == approx(plane[2, 3])


def test_p_oracle_for_a_single_tone():
    model = build_model([make_lfm(2.0, 10.0, 0.0, (0.0, 1.0))])
    assert abs(p_oracle(model, 0.5, 10.0, 0.0, 0.1)) == approx(2.0)


def test_nearest_index():
    axis = np.array([0.0, 0.5, 1.0])
    assert nearest_index(axis, 0.74) == 1
    assert nearest_index(axis, 0.75) == 1
    assert nearest_index(axis, 5.0) == 2


def test_cube_is_linear(two_lfm_model, interior_grid):
    (first, second) = two_lfm_model.components
    x = sample(build_model([first]), 128.0)
    y = sample(build_model([second]), 128.0)
    both = SampledSignal(samples=x.samples + y.samples, sample_rate=128.0)
    total = chirplet_cube(both, interior_grid).values
    parts = chirplet_cube(x, interior_grid).values + chirplet_cube(y, interior_grid).values
    assert np.max(np.abs(total - parts)) <= 1e-12
