"""Radial heat conduction in a filled cylinder with melting plateaus.

Solves ``rho * c_eff(T) * dT/dt = k / r * d/dr(r dT/dr)`` on ``0 <= r <= R`` with
a zero-flux centre and a prescribed wall temperature history. Latent heat enters
through an apparent heat capacity: a Gaussian bump of area ``L`` around every
melt temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import ndtr

from .errors import InvalidArgumentError, SolverError

HOUR = 3600.0

# (melt temperature C, latent heat J/kg, smoothing width C)
TNT_MELT = (80.0, 98.0e3, 3.0)
PETN_MELT = (140.0, 36.0e3, 3.0)


def ramp_schedule(ramp_time=4 * HOUR, t_start=20.0, t_hold=180.0):
    """Linear ramp from ``t_start`` to ``t_hold`` over ``ramp_time`` seconds, then hold."""
    return ((0.0, float(t_start)), (float(ramp_time), float(t_hold)))


@dataclass(frozen=True)
class ThermalConfig:
    inner_radius: float = 0.072
    n_grid: int = 73
    diffusivity: float = 1.0e-7
    density: float = 1650.0
    heat_capacity: float = 1100.0
    latent_heats: tuple = (TNT_MELT, PETN_MELT)
    wall_schedule: tuple = field(default_factory=ramp_schedule)
    t_initial: float = 20.0
    step_interval: float = 120.0
    max_substep: float = 5.0
    # run ends at the first step whose centre temperature reaches this value
    stop_center_temp: float | None = 160.0
    max_steps: int | None = None
    max_time: float = 72 * HOUR
    picard_tol: float = 1e-7
    picard_max_iter: int = 50

    def __post_init__(self):
        object.__setattr__(self, "latent_heats", tuple(tuple(float(v) for v in lh) for lh in self.latent_heats))
        object.__setattr__(self, "wall_schedule", tuple((float(t), float(v)) for t, v in self.wall_schedule))
        if self.inner_radius <= 0:
            raise InvalidArgumentError("inner_radius must be positive")
        if self.n_grid < 11:
            raise InvalidArgumentError("n_grid must be at least 11")
        if self.diffusivity <= 0 or self.density <= 0 or self.heat_capacity <= 0:
            raise InvalidArgumentError("material constants must be positive")
        if any(len(lh) != 3 or lh[2] <= 0 for lh in self.latent_heats):
            raise InvalidArgumentError("latent heats need (melt_temp, latent, width>0)")
        if self.step_interval <= 0 or self.max_substep <= 0:
            raise InvalidArgumentError("step_interval and max_substep must be positive")
        if not self.wall_schedule:
            raise InvalidArgumentError("wall_schedule needs at least one point")
        times = [t for t, _ in self.wall_schedule]
        if any(b < a for a, b in zip(times, times[1:])):
            raise InvalidArgumentError("wall_schedule times must be non-decreasing")
        if self.max_steps is not None and self.max_steps < 1:
            raise InvalidArgumentError("max_steps must be >= 1")

    @property
    def conductivity(self):
        return self.diffusivity * self.density * self.heat_capacity

    def wall_temperature(self, t):
        times, temps = zip(*self.wall_schedule)
        return float(np.interp(t, times, temps))

    def effective_heat_capacity(self, temp):
        temp = np.asarray(temp, dtype=float)
        c = np.full_like(temp, self.heat_capacity)
        for melt, latent, width in self.latent_heats:
            z = (temp - melt) / width
            c += latent * np.exp(-0.5 * z * z) / (width * math.sqrt(2 * math.pi))
        return c

    def enthalpy(self, temp):
        """Specific enthalpy (J/kg) relative to 0 C; its derivative is the effective capacity."""
        temp = np.asarray(temp, dtype=float)
        h = self.heat_capacity * temp
        for melt, latent, width in self.latent_heats:
            h = h + latent * ndtr((temp - melt) / width)
        return h


@dataclass(frozen=True)
class ProfileSeries:
    """Temperature profiles ``temps[step, node]`` sampled at ``times[step]``."""

    r_grid: np.ndarray
    temps: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        r = np.array(self.r_grid, dtype=float)
        temps = np.array(self.temps, dtype=float)
        times = np.array(self.times, dtype=float)
        if temps.ndim != 2 or temps.shape[1] != r.size:
            raise InvalidArgumentError("temps must be steps x n_grid")
        if times.size != temps.shape[0]:
            raise InvalidArgumentError("one time per step required")
        if r.size < 2 or r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise InvalidArgumentError("r_grid must ascend from 0")
        if not np.all(np.isfinite(temps)):
            raise InvalidArgumentError("temps must be finite")
        if np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("times must be strictly increasing")
        for name, arr in (("r_grid", r), ("temps", temps), ("times", times)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def steps(self):
        return self.temps.shape[0]

    @property
    def radius(self):
        return float(self.r_grid[-1])

    @property
    def center(self):
        return self.temps[:, 0]

    @property
    def wall(self):
        return self.temps[:, -1]

    def profile(self, step):
        """Callable ``r -> T`` interpolating one step linearly in radius."""
        row = self.temps[step]
        r_grid = self.r_grid
        return lambda r: np.interp(r, r_grid, row)


def _conduction_weights(r, h):
    """Face conductance per node (west, east), scaled so flux = k * w * dT."""
    n = r.size - 1  # unknowns exclude the wall node
    west = np.zeros(n)
    east = np.zeros(n)
    east[0] = 0.5  # r_{1/2} / h with r_{1/2} = h/2
    faces = r[:-1] + 0.5 * h
    east[1:] = faces[1:n] / h
    west[1:] = faces[0:n - 1] / h
    volume = np.empty(n)
    volume[0] = h * h / 8.0
    volume[1:] = r[1:n] * h
    return west, east, volume


def solve_heating(config: ThermalConfig) -> ProfileSeries:
    """Integrate the heating run and sample it every ``step_interval`` seconds.

    Time stepping is backward Euler with the heat capacity lagged inside a Picard
    loop. The capacity used is the enthalpy secant between the old and the
    current iterate, which keeps the latent heat budget exact across a step.
    """
    R = config.inner_radius
    r = np.linspace(0.0, R, config.n_grid)
    h = r[1] - r[0]
    k = config.conductivity
    rho = config.density
    west, east, volume = _conduction_weights(r, h)
    n = volume.size

    n_sub = max(1, math.ceil(config.step_interval / config.max_substep - 1e-12))
    dt = config.step_interval / n_sub

    temp = np.full(r.size, float(config.t_initial))
    temp[-1] = config.wall_temperature(0.0)
    t = 0.0
    rows = [temp.copy()]
    times = [0.0]

    ab = np.zeros((3, n))
    ab[0, 1:] = -k * east[:-1]
    ab[2, :-1] = -k * west[1:]
    diag_cond = k * (east + west)

    def done():
        if config.max_steps is not None and len(rows) >= config.max_steps:
            return True
        if config.stop_center_temp is not None and rows[-1][0] >= config.stop_center_temp:
            return True
        return times[-1] + config.step_interval > config.max_time + 1e-9

    while not done():
        step = len(rows)
        for _ in range(n_sub):
            t_new = t + dt
            wall = config.wall_temperature(t_new)
            old = temp[:-1]
            h_old = config.enthalpy(old)
            guess = old.copy()
            for _it in range(config.picard_max_iter):
                dT = guess - old
                small = np.abs(dT) < 1e-6
                safe = np.where(small, 1.0, dT)
                cap = np.where(
                    small,
                    config.effective_heat_capacity(0.5 * (guess + old)),
                    (config.enthalpy(guess) - h_old) / safe,
                )
                mass = rho * cap * volume / dt
                ab[1] = mass + diag_cond
                rhs = mass * old
                rhs[-1] += k * east[-1] * wall
                new = solve_banded((1, 1), ab, rhs)
                change = np.max(np.abs(new - guess))
                guess = new
                if change < config.picard_tol:
                    break
            else:
                raise SolverError(step)
            if not np.all(np.isfinite(guess)):
                raise SolverError(step, f"non-finite temperatures at step {step}")
            temp = np.append(guess, wall)
            t = t_new
        t = step * config.step_interval
        rows.append(temp.copy())
        times.append(t)

    return ProfileSeries(r_grid=r, temps=np.array(rows), times=np.array(times))


def interpolate_profile(series: ProfileSeries, step: int, n_pts: int) -> np.ndarray:
    """Temperatures at ``n_pts`` evenly spaced radii from the centre to the wall inclusive."""
    if n_pts < 2:
        raise InvalidArgumentError("n_pts must be at least 2")
    if not 0 <= step < series.steps:
        raise InvalidArgumentError(f"step {step} out of range 0..{series.steps - 1}")
    pts = np.linspace(0.0, series.radius, n_pts)
    return np.interp(pts, series.r_grid, series.temps[step])


def interpolate_series(series: ProfileSeries, n_pts: int) -> np.ndarray:
    """All steps at once; ``steps x n_pts``."""
    if n_pts < 2:
        raise InvalidArgumentError("n_pts must be at least 2")
    pts = np.linspace(0.0, series.radius, n_pts)
    return np.stack([np.interp(pts, series.r_grid, row) for row in series.temps])
