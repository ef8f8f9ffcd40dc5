"""Scale/shift correction of simulated temperatures against boundary thermocouples.

A corrected profile is ``T(r, s) = a(r) * (T'(r, c * (s - d)) - b(r))`` where
``a`` and ``b`` vary linearly between their centre and wall values and the
warped step is interpolated linearly and clamped to the simulated range.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import FitError, InvalidArgumentError
from .thermal import ProfileSeries, interpolate_series


@dataclass(frozen=True)
class BoundaryRecord:
    """Thermocouple readings at the centre (r = 0) and the wall (r = R)."""

    steps: np.ndarray
    t_center: np.ndarray
    t_wall: np.ndarray

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=int)
        center = np.asarray(self.t_center, dtype=float)
        wall = np.asarray(self.t_wall, dtype=float)
        if not (steps.shape == center.shape == wall.shape) or steps.ndim != 1:
            raise InvalidArgumentError("boundary arrays must be 1-D and of equal length")
        if not (np.all(np.isfinite(center)) and np.all(np.isfinite(wall))):
            raise InvalidArgumentError("boundary temperatures must be finite")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "t_center", center)
        object.__setattr__(self, "t_wall", wall)

    @classmethod
    def from_series(cls, series: ProfileSeries, steps=None):
        steps = np.arange(series.steps) if steps is None else np.asarray(steps)
        return cls(steps, series.center[steps], series.wall[steps])


@dataclass(frozen=True)
class CorrectionParams:
    a0: float = 1.0
    b0: float = 0.0
    aR: float = 1.0
    bR: float = 0.0
    c: float = 1.0
    d: float = 0.0

    def __post_init__(self):
        if self.a0 <= 0 or self.aR <= 0 or self.c <= 0:
            raise InvalidArgumentError("temperature and time scales must be positive")

    def as_dict(self):
        return {"a0": self.a0, "b0": self.b0, "aR": self.aR, "bR": self.bR, "c": self.c, "d": self.d}

    def to_vector(self):
        """Unconstrained coordinates used by the optimizer (log scales)."""
        return np.array([np.log(self.a0), self.b0, np.log(self.aR), self.bR, np.log(self.c), self.d])

    @classmethod
    def from_vector(cls, u):
        return cls(float(np.exp(u[0])), float(u[1]), float(np.exp(u[2])), float(u[3]),
                   float(np.exp(u[4])), float(u[5]))


IDENTITY = CorrectionParams()


def warp_rows(temps, c, d, steps=None):
    """Rows of ``temps`` at warped steps ``c * (s - d)``, linear in s, clamped to the range."""
    n = temps.shape[0]
    s = np.arange(n, dtype=float) if steps is None else np.asarray(steps, dtype=float)
    w = np.clip(c * (s - d), 0.0, n - 1)
    if n == 1:
        return np.repeat(temps[:1], s.size, axis=0)
    lo = np.minimum(np.floor(w).astype(int), n - 2)
    frac = (w - lo)[:, None]
    return temps[lo] * (1.0 - frac) + temps[lo + 1] * frac


def apply_correction(series: ProfileSeries, params: CorrectionParams) -> ProfileSeries:
    r = series.r_grid / series.radius
    a = params.a0 + (params.aR - params.a0) * r
    b = params.b0 + (params.bR - params.b0) * r
    warped = warp_rows(series.temps, params.c, params.d)
    return ProfileSeries(series.r_grid, a * (warped - b), series.times)


def boundary_prediction(series: ProfileSeries, params: CorrectionParams, steps):
    """Corrected centre and wall temperatures at the given steps."""
    edges = series.temps[:, [0, -1]]
    warped = warp_rows(edges, params.c, params.d, steps)
    center = params.a0 * (warped[:, 0] - params.b0)
    wall = params.aR * (warped[:, 1] - params.bR)
    return center, wall


def correction_objective(params: CorrectionParams, series: ProfileSeries, boundary: BoundaryRecord):
    """Mean squared boundary mismatch over both probes and all recorded steps."""
    center, wall = boundary_prediction(series, params, boundary.steps)
    err = np.concatenate([center - boundary.t_center, wall - boundary.t_wall])
    return float(np.mean(err * err))


def fit_theta(series: ProfileSeries, boundary: BoundaryRecord, *, max_evals=10_000, ftol=1e-10,
              rmse_ceiling=25.0, restarts=6) -> CorrectionParams:
    """Least-squares correction parameters via restarted Nelder-Mead from the identity.

    Scales are optimized in log space so they stay positive. Raises
    :class:`FitError` when nothing beats the identity and the identity residual
    is above ``rmse_ceiling`` (C).
    """
    steps = boundary.steps
    if steps.size == 0 or steps.min() < 0 or steps.max() >= series.steps:
        raise InvalidArgumentError("boundary steps must lie within the simulated series")

    def f(u):
        return correction_objective(CorrectionParams.from_vector(u), series, boundary)

    identity_obj = f(IDENTITY.to_vector())
    best_u = IDENTITY.to_vector()
    best = identity_obj
    scales = np.array([0.05, 2.0, 0.05, 2.0, 0.05, 1.0])
    evals = 0
    for attempt in range(restarts):
        if evals >= max_evals:
            break
        shrink = 0.5 ** attempt
        simplex = np.vstack([best_u] + [best_u + shrink * scales[i] * np.eye(6)[i] for i in range(6)])
        res = minimize(f, best_u, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "fatol": ftol, "xatol": 1e-9,
                                "maxfev": max_evals - evals})
        evals += res.nfev
        improved = best - res.fun
        if res.fun < best:
            best, best_u = float(res.fun), res.x
        if attempt > 0 and improved < ftol:
            break

    if best >= identity_obj and np.sqrt(identity_obj) > rmse_ceiling:
        raise FitError(np.sqrt(best), np.sqrt(identity_obj))
    return CorrectionParams.from_vector(best_u)


def build_labels(series: ProfileSeries, params: CorrectionParams, n_pts: int) -> np.ndarray:
    """Corrected profiles at ``n_pts`` evenly spaced radii, one row per step."""
    return interpolate_series(apply_correction(series, params), n_pts)
