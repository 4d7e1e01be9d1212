import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from guidedvoice import signals, spectral


def test_band_table_partitions_bins():
    assert spectral.BAND_EDGES[0] == 0 and spectral.BAND_EDGES[-1] == spectral.N_BINS
    assert len(spectral.BIN_TO_BAND) == spectral.N_BINS
    assert np.all(np.diff(spectral.BIN_TO_BAND) >= 0)


def test_hop_layout():
    assert spectral.n_hops(320) == 2
    assert spectral.n_hops(321) == 3
    x = np.zeros(640)
    x[200] = 1.0
    spec = spectral.stft(x)
    # sample 200 falls in hops 0 and 1 only
    energy = np.sum(np.abs(spec) ** 2, axis=1)
    assert energy[0] > 0 and energy[1] > 0 and np.all(energy[2:] == 0)


def test_zeros_give_zero_bins():
    assert np.all(spectral.stft(np.zeros(320)) == 0)


def test_sine_peaks_at_bin_32():
    t = np.arange(3200) / 16000
    p = np.abs(spectral.stft(np.sin(2 * np.pi * 1000 * t))) ** 2
    assert np.all(np.argmax(p[1:-2], axis=1) == 32)


def test_white_noise_power_is_flat_and_calibrated():
    # mean periodogram over 1000 hops; normalization makes E[power] = variance
    sigma = 0.1
    x = np.random.default_rng(0).standard_normal(160 * 1001) * sigma
    p = np.mean(np.abs(spectral.stft(x)[:1000]) ** 2, axis=0)
    db = 10 * np.log10(p[1:-1] / sigma**2)
    assert np.max(np.abs(db)) < 1.0


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(320, 4000), elements=st.floats(-1, 1)))
def test_interior_reconstruction(x):
    y = spectral.istft(spectral.stft(x), len(x))
    assert np.max(np.abs(y[spectral.HOP :] - x[spectral.HOP :]), initial=0) <= 1e-6


def test_synthesize_inverts_analyze_and_zero_frames():
    x = np.random.default_rng(1).uniform(-1, 1, 1000)
    y = spectral.synthesize(spectral.analyze(x), len(x))
    assert np.allclose(y[160:], x[160:], atol=1e-12)
    zeros = [spectral.SpectralFrame(np.zeros(spectral.N_BINS, complex), h) for h in range(4)]
    assert np.all(spectral.synthesize(zeros) == 0)


def test_unit_gain_pass_preserves_rms():
    x, _ = signals.generate("speech_like", 4.0, seed=2)
    y = spectral.istft(spectral.stft(x), len(x))
    rms = lambda v: 10 * np.log10(np.mean(v**2))  # noqa: E731
    assert abs(rms(y) - rms(x)) < 0.01


def test_band_energies_examples():
    assert np.allclose(spectral.band_energies(np.ones(257)), 0.0)
    assert np.allclose(spectral.band_energies(np.zeros(257)), -120.0)
    p = np.zeros(257)
    p[100] = 1.0
    e = spectral.band_energies(p)
    assert np.sum(e > -120) == 1 and e[spectral.BIN_TO_BAND[100]] > -120


def test_expand_envelope_examples():
    assert np.allclose(spectral.expand_envelope(np.zeros(20)), 1.0)
    assert np.allclose(spectral.expand_envelope(spectral.band_energies(np.full(257, 0.3))), 0.3)
    env = np.full(20, -120.0)
    env[0] = -20.0
    psd = spectral.expand_envelope(env)
    assert np.allclose(psd[:13], 0.01) and np.allclose(psd[13:], 1e-12)


@pytest.mark.parametrize("n", [0, 1, 159])
def test_short_inputs(n):
    x = np.ones(n)
    spec = spectral.stft(x)
    assert spec.shape == (spectral.n_hops(n), spectral.N_BINS)
    assert len(spectral.istft(spec, n)) == n
