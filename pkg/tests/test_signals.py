import math

import numpy as np
import pytest
import scipy.signal
from hypothesis import given
from hypothesis import strategies as st

from thermoscope.acoustics import AcousticConfig, RingGeometry, synthesize_measurement
from thermoscope.errors import DegenerateSignalError, InvalidArgumentError
from thermoscope.signals import (ExcitationSpec, MeasurementArray, Stage, Waveform, correlate_array,
                                 cross_correlate, decimate_array, envelope_array, hilbert_envelope,
                                 normalize, normalize_array, preprocess, preprocess_array, select_receivers)

FS = 5e6


def raw(data, tx=0, rx=(8,)):
    return MeasurementArray(np.asarray(data, float).reshape(len(data), -1), tx, rx, FS)


# receiver selection

@pytest.mark.parametrize("tx,n_rx,expected", [(0, 1, [8]), (0, 3, [7, 8, 9]), (15, 3, [6, 7, 8]),
                                              (4, 5, [10, 11, 12, 13, 14])])
def test_select_receivers_examples(tx, n_rx, expected):
    assert select_receivers(tx, n_rx, 16) == expected


@pytest.mark.parametrize("n_rx", [0, 2, 4, 17])
def test_select_receivers_rejects_bad_counts(n_rx):
    with pytest.raises(InvalidArgumentError):
        select_receivers(0, n_rx, 16)


@given(tx=st.integers(0, 15), half=st.integers(0, 7))
def test_select_receivers_symmetric_about_opposite(tx, half):
    n_rx = 2 * half + 1
    sel = select_receivers(tx, n_rx, 16)
    opposite = (tx + 8) % 16
    assert sel[half] == opposite
    assert tx not in sel and len(set(sel)) == n_rx
    # reflection about the tx-opposite axis: i -> 2*tx - i (mod n)
    assert {(2 * tx - i) % 16 for i in sel} == set(sel)
    # consecutive columns are physical neighbours
    assert all((b - a) % 16 == 1 for a, b in zip(sel, sel[1:]))


# cross-correlation

def test_correlation_with_impulse_is_identity(rng):
    x = rng.normal(size=(64, 3))
    exc = np.zeros(10)
    exc[0] = 1.0
    np.testing.assert_array_equal(correlate_array(x, exc), x)


def test_autocorrelation_peaks_at_zero_lag():
    exc = ExcitationSpec().waveform(FS).samples
    col = np.zeros(256)
    col[: exc.size] = exc
    out = correlate_array(col[:, None], exc)[:, 0]
    assert np.argmax(out) == 0
    assert out[0] == pytest.approx(np.sum(exc ** 2), rel=1e-12)


@pytest.mark.parametrize("tau", [0, 7, 100])
def test_correlation_peak_follows_delay(tau):
    exc = ExcitationSpec().waveform(FS).samples
    col = np.zeros(300)
    col[tau: tau + exc.size] = exc
    assert np.argmax(correlate_array(col[:, None], exc)[:, 0]) == tau


def test_correlation_matches_numpy_full_correlation(rng):
    x = rng.normal(size=(200, 2))
    exc = rng.normal(size=31)
    out = correlate_array(x, exc)
    for j in range(2):
        full = np.correlate(np.concatenate([x[:, j], np.zeros(exc.size)]), exc, mode="valid")
        np.testing.assert_allclose(out[:, j], full[:200], rtol=1e-12, atol=1e-12)


@given(alpha=st.floats(-5, 5), beta=st.floats(-5, 5), seed=st.integers(0, 2 ** 16))
def test_correlation_is_linear(alpha, beta, seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(size=(80, 2)), r.normal(size=(80, 2))
    exc = r.normal(size=9)
    lhs = correlate_array(alpha * a + beta * b, exc)
    rhs = alpha * correlate_array(a, exc) + beta * correlate_array(b, exc)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * (1 + np.abs(rhs).max()))


def test_cross_correlate_rejects_sample_rate_mismatch():
    m = raw(np.ones(64))
    with pytest.raises(InvalidArgumentError):
        cross_correlate(m, Waveform(np.ones(4), FS / 2))


# envelope

def test_envelope_of_cosine_is_flat():
    n = 2048
    t = np.arange(n) / FS
    col = np.cos(2 * math.pi * 350e3 * t)  # about 143 cycles
    env = envelope_array(col[:, None])[:, 0]
    inner = env[int(0.1 * n): int(0.9 * n)]
    assert np.max(np.abs(inner - 1.0)) < 0.01


def test_envelope_of_zeros_is_zero():
    np.testing.assert_array_equal(envelope_array(np.zeros((32, 2))), 0.0)


@pytest.mark.parametrize("n", [64, 65, 1000])
def test_envelope_matches_scipy_hilbert(rng, n):
    x = rng.normal(size=(n, 3))
    np.testing.assert_allclose(envelope_array(x), np.abs(scipy.signal.hilbert(x, axis=0)), rtol=1e-10,
                               atol=1e-12)


def test_envelope_of_gaussian_burst_tracks_modulation():
    # narrowband burst: modulation spectrum stays clear of negative frequencies
    spec = ExcitationSpec(std_frequency=50e3)
    t = (np.arange(2048) - 1024) / FS
    col = spec.burst(t)
    g = 0.5 * spec.amplitude * np.exp(-0.5 * (t / spec.time_sigma) ** 2)
    env = envelope_array(col[:, None])[:, 0]
    support = g > 0.1 * g.max()
    assert np.max(np.abs(env[support] - g[support]) / g[support]) < 0.02


@given(seed=st.integers(0, 2 ** 16))
def test_envelope_bounds_real_part(seed):
    x = np.random.default_rng(seed).normal(size=(128, 2))
    env = envelope_array(x)
    assert np.all(env >= 0)
    assert np.all(np.abs(x) <= env + 1e-9 * env.max())


# normalization

def check_normalized(x):
    n_t = x.shape[0]
    assert np.all(np.abs(x.mean(axis=0)) < 1e-9 * np.abs(x).max())
    np.testing.assert_allclose(np.sum(x ** 2, axis=0), n_t, rtol=1e-6)


@given(seed=st.integers(0, 2 ** 16), k=st.floats(1e-3, 1e3), c=st.floats(0, 100))
def test_normalize_properties(seed, k, c):
    env = np.abs(np.random.default_rng(seed).normal(size=(100, 3))) + 0.1
    out = normalize_array(env)
    check_normalized(out)
    np.testing.assert_allclose(normalize_array(k * env), out, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(normalize_array(env + c), out, rtol=1e-7, atol=1e-7)


def test_normalize_constant_column_names_receiver():
    env = np.ones((50, 3))
    env[:, 0] = np.linspace(0, 1, 50)
    env[:, 2] = np.linspace(1, 2, 50)
    with pytest.raises(DegenerateSignalError) as info:
        normalize_array(env, rx_indices=(7, 8, 9))
    assert info.value.rx_index == 8


def test_decimation_rejects_non_divisor():
    with pytest.raises(InvalidArgumentError):
        decimate_array(np.zeros((10, 1)), 3)


# stages and composition

def test_stage_order_is_forward_only(rng):
    m = raw(rng.normal(size=64))
    exc = Waveform(np.array([1.0, 0.5]), FS)
    cc = cross_correlate(m, exc)
    assert cc.stage == Stage.CROSS_CORRELATED
    env = hilbert_envelope(cc)
    with pytest.raises(InvalidArgumentError):
        cross_correlate(env, exc)
    with pytest.raises(InvalidArgumentError):
        env.advance(env.data, Stage.RAW)
    assert normalize(env).stage == Stage.NORMALIZED


def test_measurement_invariants():
    with pytest.raises(InvalidArgumentError):
        MeasurementArray(np.zeros((8, 2)), 3, (3, 4), FS)
    with pytest.raises(InvalidArgumentError):
        MeasurementArray(np.zeros((8, 2)), 0, (4, 4), FS)


def test_preprocess_without_decimation_is_the_composition(rng):
    m = raw(rng.normal(size=(128, 3)), rx=(7, 8, 9))
    exc = Waveform(rng.normal(size=12), FS)
    step_by_step = normalize(hilbert_envelope(cross_correlate(m, exc)))
    np.testing.assert_array_equal(preprocess(m, exc, 1).data, step_by_step.data)


def synthetic_raw(amplitude=10.0, noise=None, guided=0.0):
    exc = ExcitationSpec(amplitude=amplitude)
    cfg = AcousticConfig(noise_snr_db=noise, guided_amplitude_ratio=guided, excitation=exc)
    m = synthesize_measurement(lambda r: np.full_like(r, 60.0), 0, select_receivers(0, 3), RingGeometry(), cfg, 5)
    return m, exc.waveform(cfg.sample_rate)


def test_preprocess_single_arrival_has_one_peak():
    m, exc = synthetic_raw()
    x = preprocess(m, exc, 2).data
    for j in range(x.shape[1]):
        col = x[:, j]
        high = col > 0.5 * col.max()
        # one contiguous run of samples above half maximum
        assert np.count_nonzero(np.diff(high.astype(int)) == 1) + int(high[0]) == 1


def test_preprocess_gain_and_amplitude_invariance():
    m, exc = synthetic_raw(amplitude=10.0, noise=20.0, guided=1.5)
    ref = preprocess_array(m.data, exc.samples, 2)
    scaled = preprocess_array(3.7 * m.data, exc.samples, 2)
    np.testing.assert_allclose(scaled, ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())
    m1, exc1 = synthetic_raw(amplitude=1.0, noise=20.0, guided=1.5)
    np.testing.assert_allclose(preprocess_array(m1.data, exc1.samples, 2), ref, rtol=1e-10,
                               atol=1e-10 * np.abs(ref).max())


def test_preprocess_stacked_matches_single():
    m, exc = synthetic_raw(noise=20.0, guided=1.5)
    stacked = preprocess_array(np.stack([m.data, 2 * m.data]), exc.samples, 2)
    single = preprocess(m, exc, 2).data
    np.testing.assert_allclose(stacked[0], single, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(stacked[1], single, rtol=1e-10, atol=1e-10)
