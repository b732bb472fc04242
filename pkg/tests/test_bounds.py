import math

import numpy as np
from hypothesis import given
from hypothesis.strategies import floats
from pytest import approx, mark, raises

from core.bounds import (
    bd1, bd2, bd3, bd3_sharp, bound_curves, bound_report, check_hypotheses, context_at, cr_bound, if_bound,
    pi_bound, precision_level, recovery_bound, recovery_bound_sharp, remainder_bound, res_bound, upsilon,
    upsilon_matrix, upsilon_pair, z_box_contains,
)
from core.chirplet import chirplet_cube, make_grid, oracle_plane, slice_plane
from core.errors import InvalidArgumentError
from core.models import BoundContext, SeparationParams
from core.signal_model import build_model, component_values, make_lfm, make_sfm, sample
from core.window import B0_GAUSSIAN, DECAY_CONSTANT, beta_inv, gamma_inv, moment, pft_closed

SQRT_2_PI = math.sqrt(2 / math.pi)


def context(**overrides):
    values = dict(epsilon1=0.0, epsilon3=0.0, sigma=1.0, delta=30.0, rho=1.0,
                  amplitudes=(1.0, 1.0), if_values=(100.0, 200.0), cr_values=(0.0, 0.0))
    values.update(overrides)
    return BoundContext(**values)


def single_lfm():
    return context(delta=1.0, amplitudes=(1.0,), if_values=(10.0,), cr_values=(0.0,))


def test_exact_single_lfm_has_zero_bounds():
    ctx = single_lfm()
    assert pi_bound(ctx) == 0.0
    assert res_bound(ctx) == [0.0]
    assert bd1(ctx, 0) == 0.0
    assert bd2(ctx, 0) == 0.0
    assert bd3(ctx, 0) == 0.0
    assert bd3_sharp(ctx, 0) == 0.0


def test_pi_bound_formula():
    ctx = context(epsilon1=2.0, epsilon3=3.0, sigma=0.5)
    expected = 2.0 * SQRT_2_PI * 0.5 + (math.pi / 3) * 3.0 * 2 * SQRT_2_PI * 0.125
    assert pi_bound(ctx) == approx(expected, rel=1e-9)
    assert remainder_bound(ctx) == approx(2.0 * expected, rel=1e-9)


@mark.parametrize("sigma, delta, rho, expected", [
    (1.0, 1.0, 1.0, DECAY_CONSTANT),
    (0.25, 1.0, 1.0, 16 * DECAY_CONSTANT / 4),
    (4.0, 4.0, 1.0, DECAY_CONSTANT / 4),
    (1.0, 1.0, 4.0, 2 / math.sqrt(math.pi)),
])
def test_upsilon(sigma, delta, rho, expected):
    assert upsilon(context(sigma=sigma, delta=delta, rho=rho)) == approx(expected)


def test_upsilon_pair_far_apart():
    ctx = context()
    spread = 1 + 4 * math.pi ** 2 * 30.0 ** 2
    reach = 2 * math.pi ** 2 * 70.0 ** 2
    expected = spread ** -0.25 * math.exp(-reach / spread)
    assert upsilon_pair(ctx, 0, 1) == approx(expected)
    assert upsilon_pair(ctx, 1, 0) == upsilon_pair(ctx, 0, 1)
    assert upsilon_pair(ctx, 0, 1) < upsilon(ctx)


def test_upsilon_pair_falls_back_to_generic():
    close = context(if_values=(100.0, 120.0))
    assert upsilon_pair(close, 0, 1) == upsilon(close)
    crossing = context(sigma=0.15, delta=0.5, rho=0.15, if_values=(26.0, 26.0), cr_values=(-4.0, 4.0))
    assert upsilon_pair(crossing, 0, 1) == upsilon(crossing)


@mark.parametrize("ell, k", [(0, 0), (0, 2), (-1, 0)])
def test_upsilon_pair_rejects_indices(ell, k):
    with raises(InvalidArgumentError):
        upsilon_pair(context(), ell, k)


def test_upsilon_matrix():
    matrix = upsilon_matrix(context())
    assert matrix[0][0] is None and matrix[1][1] is None
    assert matrix[0][1] == approx(upsilon_pair(context(), 0, 1))


def test_res_bound_sums_leakage():
    ctx = context(amplitudes=(1.0, 2.0), epsilon1=0.1)
    base = ctx.M * pi_bound(ctx)
    assert res_bound(ctx) == approx([base + 2.0 * upsilon_pair(ctx, 0, 1), base + upsilon_pair(ctx, 1, 0)])


def test_bounds_of_separated_tones():
    ctx = context()
    (res, _) = res_bound(ctx)
    xi = 1 - 2 * res
    assert bd1(ctx, 0) == approx(beta_inv(xi))
    assert bd2(ctx, 0) == approx(gamma_inv(xi))
    assert bd1(ctx, 0) < 0.05
    assert bd3(ctx, 0) == approx(recovery_bound(res, 1.0))


def test_bounds_scale_with_sigma():
    assert if_bound(0.01, 1.0, 0.5) == approx(2 * if_bound(0.01, 1.0, 1.0))
    assert cr_bound(0.01, 1.0, 0.5) == approx(4 * cr_bound(0.01, 1.0, 1.0))


def test_invalid_bounds_are_none():
    assert precision_level(0.2, 1.0) is None
    assert if_bound(0.2, 1.0, 1.0) is None
    assert cr_bound(0.2, 1.0, 1.0) is None
    assert recovery_bound(0.2, 1.0) is None
    assert recovery_bound_sharp(0.2, 1.0) is None


def test_precision_level_limit():
    assert precision_level(B0_GAUSSIAN / 2, 1.0) == approx(math.exp(-0.25))
    with raises(InvalidArgumentError):
        precision_level(-0.1, 1.0)


@given(ratio=floats(0.0, B0_GAUSSIAN), amplitude=floats(0.1, 10.0))
def test_sharp_recovery_bound_is_tighter(ratio, amplitude):
    res = ratio * amplitude / 2
    assert recovery_bound_sharp(res, amplitude) <= recovery_bound(res, amplitude) * (1 + 1e-12) + 1e-15


@given(low=floats(0.0, B0_GAUSSIAN / 2), high=floats(0.0, B0_GAUSSIAN / 2))
def test_bounds_grow_with_res(low, high):
    low, high = sorted((low, high))
    assert if_bound(low, 1.0, 1.0) <= if_bound(high, 1.0, 1.0) + 1e-15
    assert cr_bound(low, 1.0, 1.0) <= cr_bound(high, 1.0, 1.0) + 1e-15
    assert recovery_bound(low, 1.0) <= recovery_bound(high, 1.0) + 1e-15


def test_recovery_bound_closed_form():
    res, amplitude = 0.01, 1.0
    xi = 1 - 2 * res
    expected = res + 2 * math.exp(0.125) * moment(1) * math.sqrt(res) + math.sqrt(1 - xi ** 4) / (2 * xi ** 2)
    assert recovery_bound(res, amplitude) == approx(expected)


def test_z_box():
    ctx = context(delta=1.0)
    assert z_box_contains(ctx, 0, 100.5, 0.2)
    assert not z_box_contains(ctx, 0, 100.5, 0.5)
    assert z_box_contains(ctx, 1, np.array([200.0, 202.0]), np.array([0.0, 0.0])).tolist() == [True, False]


def test_context_from_model(two_lfm_model):
    ctx = context_at(two_lfm_model, 4.0, 0.15, 0.5, 0.15)
    assert ctx.amplitudes == approx((1.0, 1.0))
    assert ctx.if_values == approx((26.0, 26.0))
    assert ctx.cr_values == approx((-4.0, 4.0))
    assert ctx.epsilon1 == 0.0 and ctx.epsilon3 == 0.0
    assert ctx.mu == 1.0 and ctx.M == 2.0


def test_context_rejects_bad_width(two_lfm_model):
    with raises(InvalidArgumentError):
        context_at(two_lfm_model, 4.0, 0.0, 0.5, 0.15)


def test_hypotheses_pass_for_separated_tones(two_tone_model, two_tone_params):
    checks = check_hypotheses(two_tone_model, 8.0, two_tone_params, 1.0)
    assert [c.name for c in checks] == ["separation", "interference", "threshold", "precision_0", "precision_1"]
    assert all(c.passed for c in checks)
    assert checks[0].margin == approx(40.0)


def test_narrow_window_fails_interference(two_lfm_model):
    params = SeparationParams(threshold=0.3, rho=0.15, delta=0.5, expected_components=2)
    checks = {c.name: c for c in check_hypotheses(two_lfm_model, 2.0, params, 0.15)}
    assert checks["separation"].passed
    assert not checks["interference"].passed
    assert checks["interference"].margin < 0


def test_radar_bounds_are_invalid_at_the_preset_width(radar_model):
    params = SeparationParams(threshold=0.3, rho=0.15, delta=20.0, expected_components=3)
    report = bound_report(context_at(radar_model, 0.5, 0.15, 20.0, 0.15), params)
    assert report.bd1 == [None, None, None]
    assert report.bd3 == [None, None, None]
    assert not report.passed


def test_bound_curves(two_tone_model, two_tone_params):
    reports = bound_curves(two_tone_model, [7.5, 8.0, 8.5], two_tone_params, lambda t: 1.0)
    assert [r.t for r in reports] == [7.5, 8.0, 8.5]
    assert all(r.passed for r in reports)
    assert reports[0].res == approx(reports[2].res)
    assert len(reports[1].upsilon_pairs) == 2


def test_cube_stays_within_the_remainder_bound():
    span = (0.0, 4.0)
    model = build_model([
        make_lfm(1.0, 30.0, 2.0, span, am_depth=0.1, am_freq=0.5),
        make_sfm(1.0, 60.0, 0.2, 1.0, span),
    ])
    signal = sample(model, 256.0)
    grid = make_grid(signal, 0.15, (10.0, 90.0), (-20.0, 20.0), 2.0, t_range=(1.5, 2.5), t_step=0.5)
    cube = chirplet_cube(signal, grid)
    for i, t in enumerate(grid.t_axis):
        gap = np.max(np.abs(slice_plane(cube, i) - oracle_plane(model, t, grid.eta_axis, grid.lambda_axis, 0.15)))
        assert 0.0 < gap <= remainder_bound(context_at(model, t, 0.15, 1.0, 0.15)) + 1e-6


def test_leakage_inside_each_z_box_is_within_res(two_tone_model, two_tone_signal, two_tone_params):
    sigma = 1.0
    grid = make_grid(two_tone_signal, sigma, (50.0, 250.0), (-2.0, 2.0), 0.5, t_range=(7.5, 8.5), t_step=0.5)
    cube = chirplet_cube(two_tone_signal, grid)
    E, L = np.meshgrid(grid.eta_axis, grid.lambda_axis, indexing="ij")
    for i, t in enumerate(grid.t_axis):
        ctx = context_at(two_tone_model, t, sigma, two_tone_params.delta, two_tone_params.rho)
        res = res_bound(ctx)
        values = component_values(two_tone_model, t)[:, 0]
        for ell in range(ctx.n):
            inside = z_box_contains(ctx, ell, E, L)
            assert inside.any()
            alone = values[ell] * pft_closed(sigma * (E - ctx.if_values[ell]), sigma ** 2 * (L - ctx.cr_values[ell]))
            assert np.max(np.abs(cube.values[i] - alone)[inside]) <= res[ell] + 1e-3
