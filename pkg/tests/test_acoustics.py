import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from thermoscope.acoustics import (AcousticConfig, RingGeometry, TransferModel, chord_tof, chord_tof_table,
                                   guided_tof, simpson, sound_speed, synthesize_measurement)
from thermoscope.errors import InvalidArgumentError, RecordOverflowError
from thermoscope.signals import envelope_array, select_receivers

GEOM = RingGeometry()
CFG = AcousticConfig()


def uniform(temp):
    return lambda r: np.full_like(np.asarray(r, dtype=float), temp)


def linear_profile(r):
    return 20.0 + 150.0 * np.asarray(r) / 0.072


def brute_force_tof(tx, rx, profile, geom, cfg, n=10 ** 6):
    """Midpoint rule on a fine uniform grid along the chord."""
    p0, p1 = geom.position(tx), geom.position(rx)
    length = np.linalg.norm(p1 - p0)
    total = 0.0
    for chunk in np.array_split((np.arange(n) + 0.5) / n, 10):
        pts = p0 + chunk[:, None] * (p1 - p0)
        total += np.sum(1.0 / sound_speed(profile(np.hypot(pts[:, 0], pts[:, 1])), cfg))
    return total * length / n


def test_sound_speed_examples():
    assert sound_speed(20.0, CFG) == 2200.0
    assert sound_speed(120.0, AcousticConfig(sound_speed_ref=2200, temp_coefficient=2, ref_temp=20)) == 2000.0
    assert sound_speed(500.0, AcousticConfig(temp_coefficient=0.0)) == CFG.sound_speed_ref
    assert sound_speed(1e6, CFG) == pytest.approx(0.2 * CFG.sound_speed_ref)


def test_uniform_opposing_and_adjacent_chords():
    cfg = AcousticConfig(sound_speed_ref=2000.0, temp_coefficient=0.0)
    assert chord_tof(0, 8, uniform(50), GEOM, cfg) == pytest.approx(72.0e-6, rel=1e-12)
    adjacent = 2 * 0.072 * math.sin(math.pi / 16) / 2000.0
    assert chord_tof(3, 4, uniform(50), GEOM, cfg) == pytest.approx(adjacent, rel=1e-12)


@pytest.mark.parametrize("tx,rx", [(0, 1), (0, 4), (0, 8), (5, 12)])
def test_chord_tof_matches_brute_force(tx, rx):
    ref = brute_force_tof(tx, rx, linear_profile, GEOM, CFG)
    assert chord_tof(tx, rx, linear_profile, GEOM, CFG) == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("tx,rx", [(0, 2), (0, 8), (3, 10)])
def test_chord_tof_matches_adaptive_quadrature(tx, rx):
    p0, p1 = GEOM.position(tx), GEOM.position(rx)
    length = np.linalg.norm(p1 - p0)

    def slowness(u):
        x, y = p0 + u * (p1 - p0)
        return 1.0 / sound_speed(linear_profile(math.hypot(x, y)), CFG)

    ref = quad(slowness, 0, 1, points=[0.5], epsabs=0, epsrel=1e-13, limit=200)[0] * length
    assert chord_tof(tx, rx, linear_profile, GEOM, CFG) == pytest.approx(ref, rel=1e-6)


def test_simpson_exact_on_cubics():
    x = np.linspace(0, 2, 9)
    assert simpson(x ** 3 - x, 2.0) == pytest.approx(4.0 - 2.0, rel=1e-14)
    with pytest.raises(InvalidArgumentError):
        simpson(np.ones(4), 1.0)


@given(tx=st.integers(0, 15), d=st.integers(1, 15), shift=st.integers(0, 15))
def test_reciprocity_and_ring_symmetry(tx, d, shift):
    rx = (tx + d) % 16
    fwd = chord_tof(tx, rx, linear_profile, GEOM, CFG)
    assert chord_tof(rx, tx, linear_profile, GEOM, CFG) == pytest.approx(fwd, rel=1e-12)
    rotated = chord_tof((tx + shift) % 16, (rx + shift) % 16, linear_profile, GEOM, CFG)
    assert rotated == pytest.approx(fwd, rel=1e-12)


@given(dt=st.floats(0.5, 50.0))
def test_warmer_profile_is_slower(dt):
    for rx in range(1, 9):
        assert chord_tof(0, rx, lambda r: linear_profile(r) + dt, GEOM, CFG) > chord_tof(0, rx, linear_profile,
                                                                                          GEOM, CFG)


def test_tof_table_agrees_with_chord_tof():
    r = np.linspace(0, 0.072, 37)
    temps = np.stack([linear_profile(r), 60 + 0 * r])
    table = chord_tof_table(r, temps, GEOM, CFG)
    assert np.all(np.isnan(table[:, 0]))
    for sep in range(1, 9):
        assert table[0, sep] == pytest.approx(chord_tof(0, sep, linear_profile, GEOM, CFG), rel=1e-12)
        assert table[1, sep] == pytest.approx(chord_tof(4, 4 + sep, uniform(60), GEOM, CFG), rel=1e-12)


def test_guided_tof_examples():
    assert guided_tof(0, 1, GEOM, CFG) == pytest.approx(2 * math.pi * 0.0752 / 16 / 3100, rel=1e-12)
    assert guided_tof(0, 1, GEOM, CFG) == pytest.approx(9.53e-6, abs=5e-9)
    assert guided_tof(2, 10, GEOM, CFG) == pytest.approx(math.pi * 0.0752 / 3100, rel=1e-12)
    for rx in set(range(16)) - {3}:
        assert guided_tof(3, rx, GEOM, CFG) == guided_tof(rx, 3, GEOM, CFG)
    with pytest.raises(InvalidArgumentError):
        guided_tof(4, 4, GEOM, CFG)


def peak_times(m):
    env = envelope_array(m.data)
    return np.argmax(env, axis=0) / m.sample_rate


def test_noiseless_bulk_peak_at_chord_tof():
    cfg = AcousticConfig(noise_snr_db=None, guided_amplitude_ratio=0.0)
    rx = [i for i in range(16) if i != 0]
    m = synthesize_measurement(linear_profile, 0, rx, GEOM, cfg, 0)
    expected = [chord_tof(0, r, linear_profile, GEOM, cfg) for r in rx]
    np.testing.assert_array_less(np.abs(peak_times(m) - expected), 1.0 / cfg.sample_rate + 1e-12)


def test_hotter_profile_peaks_later():
    cfg = AcousticConfig(noise_snr_db=None, guided_amplitude_ratio=0.0)
    rx = [i for i in range(16) if i != 5]
    cool = synthesize_measurement(uniform(30), 5, rx, GEOM, cfg, 0)
    hot = synthesize_measurement(uniform(150), 5, rx, GEOM, cfg, 0)
    assert np.all(peak_times(hot) > peak_times(cool))


def test_same_seed_same_output():
    rx = select_receivers(2, 5)
    a = synthesize_measurement(linear_profile, 2, rx, GEOM, CFG, 99)
    b = synthesize_measurement(linear_profile, 2, rx, GEOM, CFG, 99)
    c = synthesize_measurement(linear_profile, 2, rx, GEOM, CFG, 100)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_noise_level_matches_snr():
    cfg = AcousticConfig(noise_snr_db=20.0, guided_amplitude_ratio=0.0)
    quiet = AcousticConfig(noise_snr_db=None, guided_amplitude_ratio=0.0)
    rx = [8]
    noisy = synthesize_measurement(uniform(20), 0, rx, GEOM, cfg, 1).data
    clean = synthesize_measurement(uniform(20), 0, rx, GEOM, quiet, 1).data
    noise = (noisy - clean)[:, 0]
    bulk = clean[clean[:, 0] != 0, 0]
    # bulk RMS over the burst window vs noise standard deviation: 20 dB = factor 10
    n_win = int(round(cfg.excitation.duration * cfg.sample_rate))
    bulk_rms = np.sqrt(np.sum(bulk ** 2) / n_win)
    assert np.std(noise) == pytest.approx(bulk_rms / 10, rel=0.05)


def test_guided_arrival_and_transfer_model():
    cfg = AcousticConfig(noise_snr_db=None)
    m = synthesize_measurement(uniform(20), 0, [1], GEOM, cfg, 0)
    env = envelope_array(m.data)[:, 0]
    # adjacent pair: guided wave (ratio 1.5) dominates and arrives at the arc travel time
    assert abs(np.argmax(env) / cfg.sample_rate - guided_tof(0, 1, GEOM, cfg)) < 1.0 / cfg.sample_rate
    t = TransferModel(np.full(16, 2.0), np.full(16, 1e-6))
    shifted = synthesize_measurement(uniform(20), 0, [8], GEOM, AcousticConfig(noise_snr_db=None,
                                     guided_amplitude_ratio=0.0), 0, transfer=t)
    plain = synthesize_measurement(uniform(20), 0, [8], GEOM, AcousticConfig(noise_snr_db=None,
                                   guided_amplitude_ratio=0.0), 0)
    assert np.max(np.abs(shifted.data)) == pytest.approx(4 * np.max(np.abs(plain.data)), rel=1e-3)
    assert peak_times(shifted)[0] - peak_times(plain)[0] == pytest.approx(2e-6, abs=1.0 / cfg.sample_rate)


def test_transfer_draw_ranges():
    t = TransferModel.draw(16, CFG, 7)
    assert np.all((t.gains >= 0.7) & (t.gains <= 1.3))
    assert np.all((t.delays >= 0) & (t.delays <= 2e-6))
    assert np.array_equal(t.gains, TransferModel.draw(16, CFG, 7).gains)


def test_record_overflow_names_pair():
    cfg = AcousticConfig(n_samples=256)
    with pytest.raises(RecordOverflowError) as info:
        synthesize_measurement(uniform(20), 0, [8], GEOM, cfg, 0)
    assert info.value.tx == 0 and info.value.rx == 8


def test_geometry_validation():
    with pytest.raises(InvalidArgumentError):
        RingGeometry(n_transducers=15)
    with pytest.raises(InvalidArgumentError):
        RingGeometry(wall_thickness=0)
    with pytest.raises(InvalidArgumentError):
        chord_tof(3, 3, linear_profile, GEOM, CFG)
