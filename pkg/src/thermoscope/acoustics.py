"""Straight-ray acoustic forward model for a ring of transducers around the container.

Each received trace is a bulk burst crossing the interior along the chord, a
guided burst running around the wall on the shorter arc, per-transducer
coupling gains and delays, and white noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, RecordOverflowError
from .signals import ExcitationSpec, MeasurementArray, Stage

N_SIMPSON = 257


@dataclass(frozen=True)
class RingGeometry:
    n_transducers: int = 16
    inner_radius: float = 0.072
    wall_thickness: float = 0.0064
    height: float = 0.200

    def __post_init__(self):
        if self.n_transducers < 4 or self.n_transducers % 2:
            raise InvalidArgumentError("n_transducers must be even and >= 4")
        if min(self.inner_radius, self.wall_thickness, self.height) <= 0:
            raise InvalidArgumentError("geometry lengths must be positive")

    @property
    def mid_wall_radius(self):
        return self.inner_radius + 0.5 * self.wall_thickness

    def position(self, index, radius=None):
        radius = self.inner_radius if radius is None else radius
        angle = 2 * math.pi * (index % self.n_transducers) / self.n_transducers
        return np.array([radius * math.cos(angle), radius * math.sin(angle)])

    def separation(self, tx, rx):
        d = (rx - tx) % self.n_transducers
        return min(d, self.n_transducers - d)

    def chord_length(self, tx, rx):
        sep = self.separation(tx, rx)
        return 2 * self.inner_radius * math.sin(math.pi * sep / self.n_transducers)


@dataclass(frozen=True)
class AcousticConfig:
    sound_speed_ref: float = 2200.0
    ref_temp: float = 20.0
    temp_coefficient: float = 2.0  # m/s lost per degree C
    guided_speed: float = 3100.0
    bulk_attenuation: float = 8.0  # Np/m
    guided_amplitude_ratio: float = 1.5
    noise_snr_db: float | None = 20.0
    excitation: ExcitationSpec = field(default_factory=ExcitationSpec)
    sample_rate: float = 5.0e6
    n_samples: int = 2048
    gain_range: tuple = (0.7, 1.3)
    delay_range: tuple = (0.0, 2.0e-6)

    def __post_init__(self):
        if self.sound_speed_ref <= 0 or self.guided_speed <= 0:
            raise InvalidArgumentError("wave speeds must be positive")
        if self.guided_amplitude_ratio < 0:
            raise InvalidArgumentError("guided_amplitude_ratio must be >= 0")
        if self.sample_rate <= 0 or self.n_samples < 2:
            raise InvalidArgumentError("invalid sampling")
        object.__setattr__(self, "gain_range", tuple(self.gain_range))
        object.__setattr__(self, "delay_range", tuple(self.delay_range))

    @property
    def record_length(self):
        return self.n_samples / self.sample_rate


@dataclass(frozen=True)
class TransferModel:
    """Per-transducer coupling: multiplicative gain and added time delay."""

    gains: np.ndarray
    delays: np.ndarray

    @classmethod
    def ideal(cls, n_transducers):
        return cls(np.ones(n_transducers), np.zeros(n_transducers))

    @classmethod
    def draw(cls, n_transducers, config: AcousticConfig, seed):
        rng = np.random.default_rng(seed)
        gains = rng.uniform(*config.gain_range, size=n_transducers)
        delays = rng.uniform(*config.delay_range, size=n_transducers)
        return cls(gains, delays)


def sound_speed(temp, config: AcousticConfig):
    """Linear decrease with temperature, floored at 20% of the reference speed."""
    c = config.sound_speed_ref - config.temp_coefficient * (np.asarray(temp, dtype=float) - config.ref_temp)
    c = np.maximum(c, 0.2 * config.sound_speed_ref)
    return float(c) if np.ndim(c) == 0 else c


def simpson(values, length):
    n = values.shape[-1]
    if n < 3 or n % 2 == 0:
        raise InvalidArgumentError("composite Simpson needs an odd number >= 3 of points")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return values @ w * (length / (n - 1) / 3.0)


def chord_radii(tx, rx, geometry: RingGeometry, n_points=N_SIMPSON):
    """Distance from the axis at ``n_points`` evenly spaced positions along the chord."""
    p0 = geometry.position(tx)
    p1 = geometry.position(rx)
    u = np.linspace(0.0, 1.0, n_points)[:, None]
    pts = p0 + u * (p1 - p0)
    return np.hypot(pts[:, 0], pts[:, 1])


def chord_tof(tx, rx, profile, geometry: RingGeometry, config: AcousticConfig, n_points=N_SIMPSON):
    """Bulk travel time along the straight chord; ``profile`` maps radius (m) to temperature (C)."""
    if tx % geometry.n_transducers == rx % geometry.n_transducers:
        raise InvalidArgumentError("tx and rx must differ")
    r = chord_radii(tx, rx, geometry, n_points)
    slowness = 1.0 / sound_speed(profile(r), config)
    length = float(np.linalg.norm(geometry.position(rx) - geometry.position(tx)))
    return float(simpson(slowness, length))


def chord_tof_table(r_grid, temps, geometry: RingGeometry, config: AcousticConfig, n_points=N_SIMPSON):
    """Bulk travel times for every step and every ring separation ``1..n/2``.

    Radially symmetric profiles make the travel time depend only on separation,
    so the table has shape ``steps x (n/2 + 1)`` with column 0 unused (NaN).
    """
    temps = np.atleast_2d(temps)
    n_half = geometry.n_transducers // 2
    table = np.full((temps.shape[0], n_half + 1), np.nan)
    for sep in range(1, n_half + 1):
        r = chord_radii(0, sep, geometry, n_points)
        length = geometry.chord_length(0, sep)
        t_on_chord = np.stack([np.interp(r, r_grid, row) for row in temps])
        table[:, sep] = simpson(1.0 / sound_speed(t_on_chord, config), length)
    return table


def guided_tof(tx, rx, geometry: RingGeometry, config: AcousticConfig):
    sep = geometry.separation(tx, rx)
    if sep == 0:
        raise InvalidArgumentError("tx and rx must differ")
    arc = 2 * math.pi * geometry.mid_wall_radius * sep / geometry.n_transducers
    return arc / config.guided_speed


def _add_burst(column, arrival, amplitude, config: AcousticConfig, half_window):
    fs = config.sample_rate
    lo = max(0, math.ceil((arrival - half_window) * fs))
    hi = min(column.size, math.floor((arrival + half_window) * fs) + 1)
    t = np.arange(lo, hi) / fs - arrival
    column[lo:hi] += amplitude * config.excitation.burst(t)


def bulk_rms(amplitude, config: AcousticConfig):
    """RMS of a bulk burst of the given amplitude over the excitation duration."""
    fs = config.sample_rate
    exc = config.excitation
    t = (np.arange(int(round(exc.duration * fs))) - 0.5 * exc.duration * fs) / fs
    return abs(amplitude) * float(np.sqrt(np.mean(exc.burst(t) ** 2)))


def synthesize_columns(bulk_tofs, rx_indices, tx, geometry, config, rng, transfer=None):
    """Raw traces (``N_t x len(rx_indices)``) for precomputed bulk travel times."""
    transfer = transfer or TransferModel.ideal(geometry.n_transducers)
    half_window = 0.5 * config.excitation.duration
    out = np.zeros((config.n_samples, len(rx_indices)))
    noise_sigma = []
    for j, rx in enumerate(rx_indices):
        gain = transfer.gains[tx] * transfer.gains[rx]
        delay = transfer.delays[tx] + transfer.delays[rx]
        bulk_amp = gain * math.exp(-config.bulk_attenuation * geometry.chord_length(tx, rx))
        arrivals = [bulk_tofs[j] + delay]
        _add_burst(out[:, j], arrivals[0], bulk_amp, config, half_window)
        if config.guided_amplitude_ratio > 0:
            arrivals.append(guided_tof(tx, rx, geometry, config) + delay)
            _add_burst(out[:, j], arrivals[1], gain * config.guided_amplitude_ratio, config, half_window)
        last = max(arrivals) + half_window
        if last > config.record_length:
            raise RecordOverflowError(tx, rx, last, config.record_length)
        noise_sigma.append(bulk_rms(bulk_amp, config))
    if config.noise_snr_db is not None:
        sigma = np.array(noise_sigma) / 10 ** (config.noise_snr_db / 20.0)
        out += rng.standard_normal(out.shape) * sigma
    return out


def synthesize_measurement(profile, tx, rx_indices, geometry: RingGeometry, config: AcousticConfig,
                           rng_seed, transfer: TransferModel | None = None) -> MeasurementArray:
    """Raw measurement for one transmitter given a radial temperature profile (callable ``r -> C``).

    Deterministic for a given ``rng_seed`` (anything ``numpy.random.default_rng`` accepts).
    """
    rx_indices = [int(i) for i in rx_indices]
    n = geometry.n_transducers
    if not 0 <= tx < n or any(not 0 <= i < n for i in rx_indices):
        raise InvalidArgumentError("transducer index out of range")
    tofs = [chord_tof(tx, rx, profile, geometry, config) for rx in rx_indices]
    rng = np.random.default_rng(rng_seed)
    data = synthesize_columns(tofs, rx_indices, tx, geometry, config, rng, transfer)
    return MeasurementArray(data, tx, tuple(rx_indices), config.sample_rate, Stage.RAW)
