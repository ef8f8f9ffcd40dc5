"""Waveform preprocessing: receiver selection, matched filtering, envelopes, normalization.

Array-level helpers take data with time on axis ``-2`` and receivers on axis
``-1`` so that stacks of measurements (``steps x N_t x N_rx``) go through in one
call. The :class:`MeasurementArray` wrappers carry the bookkeeping.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateSignalError, InvalidArgumentError

VALID_N_RX = (1, 3, 5, 7, 9)


class Stage(enum.IntEnum):
    RAW = 0
    CROSS_CORRELATED = 1
    ENVELOPE = 2
    NORMALIZED = 3


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise InvalidArgumentError("waveform needs at least 2 samples")
        if not np.all(np.isfinite(s)):
            raise InvalidArgumentError("waveform samples must be finite")
        if self.sample_rate <= 0:
            raise InvalidArgumentError("sample_rate must be positive")
        object.__setattr__(self, "samples", s)

    @property
    def times(self):
        return self.t0 + np.arange(self.samples.size) / self.sample_rate


@dataclass(frozen=True)
class ExcitationSpec:
    """Gaussian tone burst driving the transmitter."""

    center_frequency: float = 350e3
    std_frequency: float = 150e3
    amplitude: float = 10.0  # volts peak-to-peak
    duration: float = 10e-6

    def __post_init__(self):
        if self.center_frequency <= 0 or self.std_frequency <= 0 or self.duration <= 0:
            raise InvalidArgumentError("excitation frequencies and duration must be positive")

    @property
    def time_sigma(self):
        """Standard deviation of the burst envelope in seconds."""
        return 1.0 / (2 * math.pi * self.std_frequency)

    def burst(self, t):
        """Burst evaluated at times ``t`` measured from its centre."""
        t = np.asarray(t, dtype=float)
        env = np.exp(-0.5 * (t / self.time_sigma) ** 2)
        return 0.5 * self.amplitude * env * np.cos(2 * math.pi * self.center_frequency * t)

    def waveform(self, sample_rate):
        n = int(round(self.duration * sample_rate))
        t = np.arange(n) / sample_rate - 0.5 * self.duration
        return Waveform(self.burst(t), sample_rate, t0=0.0)


@dataclass(frozen=True)
class MeasurementArray:
    """``N_t x N_rx`` waveforms from one transmitter, tagged with a processing stage."""

    data: np.ndarray
    tx_index: int
    rx_indices: tuple
    sample_rate: float
    stage: Stage = Stage.RAW
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise InvalidArgumentError("measurement data must be N_t x N_rx")
        rx = tuple(int(i) for i in self.rx_indices)
        if data.shape[1] != len(rx):
            raise InvalidArgumentError("one column per receiver index required")
        if len(set(rx)) != len(rx):
            raise InvalidArgumentError("receiver indices must be distinct")
        if self.tx_index in rx:
            raise InvalidArgumentError("transmitter cannot also be a receiver")
        if self.sample_rate <= 0:
            raise InvalidArgumentError("sample_rate must be positive")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "rx_indices", rx)
        object.__setattr__(self, "stage", Stage(self.stage))

    @property
    def n_t(self):
        return self.data.shape[0]

    @property
    def n_rx(self):
        return self.data.shape[1]

    def advance(self, data, stage, sample_rate=None):
        if stage <= self.stage:
            raise InvalidArgumentError(f"cannot move from {self.stage.name} to {Stage(stage).name}")
        return replace(self, data=data, stage=stage, sample_rate=sample_rate or self.sample_rate)

    def select(self, rx_indices):
        """Subset of columns in the order given."""
        cols = [self.rx_indices.index(i) for i in rx_indices]
        return replace(self, data=self.data[:, cols], rx_indices=tuple(rx_indices))


def select_receivers(tx_index, n_rx, n_transducers=16):
    """Odd window of receivers centred on the transducer diametrically opposite ``tx_index``."""
    if n_transducers % 2 or n_transducers < 4:
        raise InvalidArgumentError("n_transducers must be even and >= 4")
    if n_rx % 2 == 0:
        raise InvalidArgumentError(f"n_rx must be odd, got {n_rx}")
    if not 1 <= n_rx <= n_transducers - 1:
        raise InvalidArgumentError(f"n_rx must lie in 1..{n_transducers - 1}")
    half = (n_rx - 1) // 2
    opposite = tx_index + n_transducers // 2
    return [(opposite + k) % n_transducers for k in range(-half, half + 1)]


def _require_stage(measurement, stage):
    if measurement.stage != stage:
        raise InvalidArgumentError(f"expected {stage.name} measurement, got {measurement.stage.name}")


def correlate_array(raw, excitation):
    """Linear cross-correlation at lags ``0..N_t-1`` along axis -2.

    ``out[l] = sum_n raw[n + l] * excitation[n]``; samples past the record end
    count as zero.
    """
    raw = np.asarray(raw, dtype=float)
    exc = np.asarray(excitation, dtype=float)
    n_t = raw.shape[-2]
    if exc.size > n_t:
        raise InvalidArgumentError("excitation longer than the record")
    out = np.zeros_like(raw)
    for n, e in enumerate(exc):
        if e != 0.0:
            out[..., : n_t - n, :] += e * raw[..., n:, :]
    return out


def envelope_array(x):
    """Magnitude of the discrete analytic signal along axis -2."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-2]
    if n < 4:
        raise InvalidArgumentError("envelope needs at least 4 samples")
    spec = np.fft.fft(x, axis=-2)
    weights = np.zeros(n)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[n // 2] = 1.0
        weights[1 : n // 2] = 2.0
    else:
        weights[1 : (n + 1) // 2] = 2.0
    analytic = np.fft.ifft(spec * weights[:, None], axis=-2)
    return np.abs(analytic)


def normalize_array(env, rx_indices=None):
    """Zero-mean columns scaled so each column's sum of squares equals N_t."""
    env = np.asarray(env, dtype=float)
    n_t = env.shape[-2]
    centred = env - env.mean(axis=-2, keepdims=True)
    ss = np.sum(centred * centred, axis=-2, keepdims=True)
    scale = np.max(np.abs(env), axis=-2, keepdims=True)
    degenerate = ss <= (n_t * (64 * np.finfo(float).eps * scale) ** 2)
    if np.any(degenerate):
        col = int(np.argwhere(degenerate.reshape(-1, env.shape[-1]))[0][1])
        rx = rx_indices[col] if rx_indices is not None else col
        raise DegenerateSignalError(rx)
    return math.sqrt(n_t) * centred / np.sqrt(ss)


def decimate_array(x, factor):
    if factor < 1:
        raise InvalidArgumentError("decimation must be a positive integer")
    if x.shape[-2] % factor:
        raise InvalidArgumentError(f"decimation {factor} does not divide N_t={x.shape[-2]}")
    return x[..., ::factor, :]


def cross_correlate(measurement: MeasurementArray, excitation: Waveform) -> MeasurementArray:
    _require_stage(measurement, Stage.RAW)
    if not math.isclose(measurement.sample_rate, excitation.sample_rate, rel_tol=1e-12):
        raise InvalidArgumentError(
            f"sample rate mismatch: measurement {measurement.sample_rate} Hz, "
            f"excitation {excitation.sample_rate} Hz"
        )
    out = correlate_array(measurement.data, excitation.samples)
    return measurement.advance(out, Stage.CROSS_CORRELATED)


def hilbert_envelope(measurement: MeasurementArray) -> MeasurementArray:
    _require_stage(measurement, Stage.CROSS_CORRELATED)
    return measurement.advance(envelope_array(measurement.data), Stage.ENVELOPE)


def normalize(measurement: MeasurementArray) -> MeasurementArray:
    _require_stage(measurement, Stage.ENVELOPE)
    out = normalize_array(measurement.data, measurement.rx_indices)
    return measurement.advance(out, Stage.NORMALIZED)


def preprocess_array(raw, excitation, decimation=2, rx_indices=None):
    """Stacked version of :func:`preprocess` on plain arrays (time on axis -2)."""
    raw = np.asarray(raw, dtype=float)
    if decimation < 1 or raw.shape[-2] % decimation:
        raise InvalidArgumentError(f"decimation {decimation} must divide N_t={raw.shape[-2]}")
    env = envelope_array(correlate_array(raw, excitation))
    return normalize_array(decimate_array(env, decimation), rx_indices)


def preprocess(measurement: MeasurementArray, excitation: Waveform, decimation: int = 2) -> MeasurementArray:
    """Cross-correlate, take the envelope, keep every ``decimation``-th sample, normalize.

    Decimating after envelope extraction is safe because the envelope is slowly
    varying compared with the carrier.
    """
    if decimation < 1 or measurement.n_t % decimation:
        raise InvalidArgumentError(f"decimation {decimation} must divide N_t={measurement.n_t}")
    env = hilbert_envelope(cross_correlate(measurement, excitation))
    if decimation > 1:
        env = replace(env, data=decimate_array(env.data, decimation),
                      sample_rate=env.sample_rate / decimation)
    return normalize(env)
