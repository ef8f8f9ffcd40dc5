import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import j1, jn_zeros

from thermoscope.errors import InvalidArgumentError
from thermoscope.thermal import (HOUR, ProfileSeries, ThermalConfig, interpolate_profile, interpolate_series,
                                 ramp_schedule, solve_heating)


def bessel_center(t, t_init, t_wall, alpha, radius, n_terms=200):
    """Centre temperature of a cylinder after a wall step, classical eigenfunction series."""
    lam = jn_zeros(0, n_terms)
    series = np.sum(2.0 / (lam * j1(lam)) * np.exp(-lam ** 2 * alpha * t / radius ** 2))
    return t_wall + (t_init - t_wall) * series


@pytest.fixture(scope="module")
def default_run():
    return solve_heating(ThermalConfig())


def step_config(**kw):
    base = dict(latent_heats=(), wall_schedule=((0.0, 180.0),), stop_center_temp=None, step_interval=600.0)
    base.update(kw)
    return ThermalConfig(**base)


def test_equilibrium_stays_put():
    cfg = ThermalConfig(wall_schedule=((0.0, 20.0),), stop_center_temp=None, max_steps=30)
    s = solve_heating(cfg)
    assert np.max(np.abs(s.temps - 20.0)) < 1e-9


def test_step_response_matches_bessel_series():
    cfg = step_config(max_time=5 * HOUR)
    s = solve_heating(cfg)
    for k in (6, 12, 24):
        expected = bessel_center(s.times[k], 20.0, 180.0, cfg.diffusivity, cfg.inner_radius)
        assert abs(s.center[k] - expected) < 0.5


def test_steady_state_is_uniform():
    cfg = step_config(step_interval=1800.0, max_substep=60.0, max_time=72 * HOUR)
    s = solve_heating(cfg)
    assert np.max(np.abs(s.temps[-1] - 180.0)) < 0.1


def test_maximum_principle_without_latent_heat():
    cfg = ThermalConfig(latent_heats=(), stop_center_temp=None, max_steps=200)
    s = solve_heating(cfg)
    assert s.temps.min() >= 20.0 - 1e-9
    assert s.temps.max() <= 180.0 + 1e-9


def test_wall_follows_schedule_and_is_monotone(default_run):
    s = default_run
    assert np.all(np.diff(s.wall) >= 0)
    cfg = ThermalConfig()
    np.testing.assert_allclose(s.wall, [cfg.wall_temperature(t) for t in s.times])


def test_run_stops_when_center_reaches_threshold(default_run):
    s = default_run
    assert s.center[-1] >= 160.0 > s.center[-2]
    assert s.r_grid[0] == 0.0 and s.r_grid[-1] == pytest.approx(0.072)
    assert np.all(np.diff(s.times) == 120.0)


def test_melting_plateau_near_80(default_run):
    """Centre heating slows while the first component melts."""
    s = default_run
    plain = solve_heating(replace(ThermalConfig(), latent_heats=(), stop_center_temp=None, max_steps=s.steps))

    def steps_between(series, lo, hi):
        c = series.center
        return np.count_nonzero((c >= lo) & (c < hi))

    assert steps_between(s, 75, 85) > 2 * steps_between(plain, 75, 85)
    # away from both melt ranges the latent run is not slower per degree
    assert steps_between(s, 100, 120) < 1.5 * steps_between(plain, 100, 120)


def test_grid_convergence_of_final_profile(default_run):
    fine = solve_heating(replace(ThermalConfig(), n_grid=145, stop_center_temp=None,
                                 max_steps=default_run.steps))
    assert np.max(np.abs(fine.temps[-1, ::2] - default_run.temps[-1])) < 0.2


def test_zero_slope_at_axis_without_latent_heat():
    s = solve_heating(ThermalConfig(latent_heats=()))
    h_mm = s.r_grid[1] * 1e3
    assert np.max(np.abs(s.temps[:, 1] - s.temps[:, 0])) / h_mm < 0.1


def test_axis_slope_with_latent_heat_shrinks_with_grid():
    # a melt front crossing the axis steepens the profile; the residual slope is discretization error
    def axis_slope(n_grid):
        s = solve_heating(ThermalConfig(n_grid=n_grid))
        h_mm = s.r_grid[1] * 1e3
        t = s.temps
        return np.max(np.abs(-3 * t[:, 0] + 4 * t[:, 1] - t[:, 2])) / (2 * h_mm)

    coarse, fine = axis_slope(73), axis_slope(145)
    assert fine < 0.1
    assert fine < 0.5 * coarse


def test_config_validation():
    for bad in (dict(inner_radius=0), dict(n_grid=10), dict(diffusivity=-1),
                dict(latent_heats=((80.0, 1e3, 0.0),)), dict(step_interval=0)):
        with pytest.raises(InvalidArgumentError):
            ThermalConfig(**bad)


def test_ramp_schedule():
    cfg = ThermalConfig(wall_schedule=ramp_schedule(100.0, 20.0, 120.0))
    assert cfg.wall_temperature(50.0) == pytest.approx(70.0)
    assert cfg.wall_temperature(1e6) == 120.0


def test_latent_heat_bump_has_latent_area():
    cfg = ThermalConfig(latent_heats=((80.0, 98e3, 3.0),))
    t = np.linspace(40, 120, 8001)
    extra = cfg.effective_heat_capacity(t) - cfg.heat_capacity
    assert np.trapezoid(extra, t) == pytest.approx(98e3, rel=1e-6)
    # enthalpy is the integral of the apparent capacity
    assert cfg.enthalpy(120.0) - cfg.enthalpy(40.0) == pytest.approx(np.trapezoid(extra, t) + 80 * 1100, rel=1e-6)


# interpolation

def linear_series(n_grid=11, steps=3):
    r = np.linspace(0, 0.072, n_grid)
    temps = np.stack([20 + 100 * r / 0.072 + k for k in range(steps)])
    return ProfileSeries(r, temps, np.arange(steps) * 120.0)


def test_interpolate_identity_grid():
    s = linear_series()
    np.testing.assert_allclose(interpolate_profile(s, 1, 11), s.temps[1], rtol=0, atol=1e-12)


def test_interpolate_endpoints():
    s = linear_series()
    np.testing.assert_array_equal(interpolate_profile(s, 2, 2), [s.temps[2, 0], s.temps[2, -1]])


@given(n_pts=st.integers(2, 80))
def test_interpolate_linear_is_exact(n_pts):
    s = linear_series()
    r = np.linspace(0, 0.072, n_pts)
    np.testing.assert_allclose(interpolate_profile(s, 0, n_pts), 20 + 100 * r / 0.072, atol=1e-10)
    np.testing.assert_allclose(interpolate_series(s, n_pts)[0], interpolate_profile(s, 0, n_pts))


def test_interpolate_rejects_bad_step():
    with pytest.raises(InvalidArgumentError):
        interpolate_profile(linear_series(), 3, 5)
    with pytest.raises(InvalidArgumentError):
        interpolate_profile(linear_series(), 0, 1)


def test_profile_series_is_immutable():
    s = linear_series()
    with pytest.raises(ValueError):
        s.temps[0, 0] = 1.0
    with pytest.raises(InvalidArgumentError):
        ProfileSeries(s.r_grid, s.temps, np.array([0.0, 1.0, 1.0]))
