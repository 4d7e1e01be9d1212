import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_toeplitz
from scipy.signal import lfilter

from guidedvoice import framestream as fs
from guidedvoice import spectral, uplink
from guidedvoice.uplink import (
    DegenerateFrame,
    EncoderConfig,
    analyze_lpc,
    autocorrelation,
    encode,
    estimate_pitch,
    levinson,
    new_classifier_state,
    new_vad_state,
    vad_decide,
    vad_update,
)

FS = 16000


def tone(freq, n=320, amp=0.5):
    return amp * np.sin(2 * np.pi * freq * np.arange(n) / FS)


# ---------------------------------------------------------------- VAD


def test_vad_zero_frame_inactive():
    active, state = vad_decide(np.zeros(320), new_vad_state())
    assert not active and state.noise_floor_db == pytest.approx(-120.0)


def test_vad_sine_after_silence_active():
    state = new_vad_state()
    vad_update(np.zeros(320), state)
    assert vad_update(tone(1000), state)


def test_vad_decide_is_pure():
    state = new_vad_state()
    vad_decide(tone(500), state)
    assert len(state.history) == 0


def test_hangover_exactly_five_frames():
    state = new_vad_state()
    quiet = np.random.default_rng(0).standard_normal(320) * 1e-3
    for _ in range(10):
        vad_update(quiet, state)
    for _ in range(10):
        assert vad_update(tone(300, amp=0.3), state)
    tail = [vad_update(quiet, state) for _ in range(10)]
    assert tail == [True] * 5 + [False] * 5


def test_vad_gate_blocks_quiet_bursts():
    state = new_vad_state()
    vad_update(np.zeros(320), state)
    # 30 dB above the floor but below the -60 dBFS gate
    assert not vad_update(tone(300, amp=1e-4), state)


@settings(max_examples=60, deadline=None)
@given(st.floats(1.0, 20.0), st.integers(0, 2**16))
def test_vad_monotone_in_amplitude(scale, seed):
    rng = np.random.default_rng(seed)
    state = new_vad_state()
    for _ in range(5):
        vad_update(rng.standard_normal(320) * 1e-3, state)
    frame = rng.standard_normal(320) * 10 ** rng.uniform(-4, -1)
    base = uplink.frame_energy_db(frame)
    louder = uplink.frame_energy_db(frame * scale)
    floor = state.noise_floor_db
    cfg = EncoderConfig()
    if uplink.vad_raw(base, floor, cfg):
        assert uplink.vad_raw(louder, floor, cfg)


# ---------------------------------------------------------------- LPC


def test_levinson_white_autocorrelation():
    r = np.zeros(17)
    r[0] = 1.0
    a, k = levinson(r, 16)
    assert np.allclose(a, 0) and np.allclose(k, 0)


def test_levinson_ar1_closed_form():
    a, _ = levinson(0.9 ** np.arange(17), 16)
    assert a[0] == pytest.approx(0.9)
    assert np.allclose(a[1:], 0, atol=1e-12)


def test_levinson_rejects_non_positive_definite():
    with pytest.raises(ArithmeticError):
        levinson(np.array([1.0, 1.0, 1.0]), 2)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lpc_matches_toeplitz_solve(seed):
    rng = np.random.default_rng(seed)
    x = np.convolve(rng.standard_normal(320), rng.standard_normal(rng.integers(1, 10)), "same")
    r = autocorrelation(x, 16)
    r[0] *= 1 + 1e-4
    ref = solve_toeplitz(r[:16], r[1:])
    a = analyze_lpc(x)
    assert np.linalg.norm(a - ref) <= 1e-6 * np.linalg.norm(ref) + 1e-12
    _, k = levinson(r, 16)
    assert np.all(np.abs(k) < 1)


def test_lpc_degenerate_frame():
    assert np.all(analyze_lpc(np.zeros(320)) == 0)
    with pytest.raises(DegenerateFrame):
        analyze_lpc(np.zeros(320), strict=True)


# ---------------------------------------------------------------- pitch


@pytest.mark.parametrize("freq,lag", [(200, 80), (100, 160), (250, 64)])
def test_pitch_of_sines(freq, lag):
    x = tone(freq, 640)
    assert estimate_pitch(x[320:], history=x[:320]) == lag


def test_pitch_of_100hz_without_history():
    assert estimate_pitch(tone(100)) == 160


def test_pitch_of_pulse_train_is_not_a_multiple():
    x = np.zeros(640)
    x[::133] = 1.0
    assert estimate_pitch(x[320:], history=x[:320]) == 133


def test_white_noise_unvoiced():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.standard_normal(640)
        assert estimate_pitch(x[320:], history=x[:320]) == 0


# ---------------------------------------------------------------- classifier


def _classify(x, state=None):
    state = state or new_classifier_state()
    modes = [uplink.classify_update(p, state) for p in np.abs(spectral.stft(x)) ** 2]
    return modes, state


def test_steady_chord_is_music():
    t = np.arange(160 * 100) / FS
    chord = sum(0.1 * np.sin(2 * np.pi * f * t) for f in (262, 392, 659))
    modes, state = _classify(chord)
    assert modes[-1] is fs.CodingMode.MUSIC
    assert np.mean(state.flux_history) < 0.10


def test_modulated_ar_is_voice():
    rng = np.random.default_rng(4)
    n = 160 * 200
    ar = lfilter([1.0], [1, -1.3, 0.6], rng.standard_normal(n))
    env = 0.5 * (1 + np.sin(2 * np.pi * 4 * np.arange(n) / FS))
    modes, state = _classify(0.05 * ar * env)
    assert all(m is fs.CodingMode.VOICE for m in modes)
    assert np.mean(state.flux_history) > 0.10


def test_silence_keeps_previous_mode():
    t = np.arange(160 * 100) / FS
    _, state = _classify(0.1 * np.sin(2 * np.pi * 440 * t))
    assert state.mode is fs.CodingMode.MUSIC
    modes, _ = _classify(np.zeros(160 * 60), state)
    assert all(m is fs.CodingMode.MUSIC for m in modes)


def test_hysteresis_delays_flip():
    t = np.arange(160 * 100) / FS
    _, state = _classify(0.1 * np.sin(2 * np.pi * 440 * t))
    noise = np.random.default_rng(5).standard_normal(160 * 200) * 0.05
    modes, _ = _classify(noise, state)
    flip = next(i for i, m in enumerate(modes) if m is fs.CodingMode.VOICE)
    assert flip >= 25


# ---------------------------------------------------------------- encode


def categories(frames):
    return [f.category for f in frames]


def test_silence_cadence():
    _, frames = encode(np.zeros(320 * 80))
    cats = categories(frames)
    want = [fs.FrameCategory.SID if i % 8 == 0 else fs.FrameCategory.NO_DATA for i in range(80)]
    assert cats == want


def test_dtx_off_all_speech_and_passthrough():
    x = np.random.default_rng(6).uniform(-0.5, 0.5, 320 * 10)
    header, frames = encode(x, dtx=False)
    assert header.frame_count == 10
    assert all(c is fs.FrameCategory.SPEECH for c in categories(frames))
    pcm = np.concatenate([f.speech().pcm for f in frames])
    assert np.array_equal(pcm, uplink.to_int16(x))


def test_continuous_activity_is_speech_after_first_frame():
    # voiced syllables at 8 per second; frame 0 only has itself as floor reference
    n = 320 * 60
    t = np.arange(n) / FS
    x = 0.3 * np.sin(2 * np.pi * 180 * t) * np.abs(np.sin(2 * np.pi * 4 * t))
    cats = categories(encode(x)[1])
    assert all(c is fs.FrameCategory.SPEECH for c in cats[1:])


def test_speech_then_noise_tail():
    rng = np.random.default_rng(7)
    quiet = rng.standard_normal(320 * 40) * 1e-3
    burst = rng.standard_normal(320 * 20) * 0.1
    x = np.concatenate([quiet, burst, quiet])
    cats = categories(encode(x)[1])
    tail = cats[60:]
    assert tail[:5] == [fs.FrameCategory.SPEECH] * 5
    assert tail[5] is fs.FrameCategory.SID
    assert tail[6:13] == [fs.FrameCategory.NO_DATA] * 7
    assert tail[13] is fs.FrameCategory.SID


def test_tail_is_zero_padded():
    header, frames = encode(np.zeros(500))
    assert header.frame_count == 2


def test_sid_envelope_tracks_noise_level():
    x = np.random.default_rng(8).standard_normal(320 * 20) * 10 ** (-40 / 20)
    _, frames = encode(x)
    env = frames[0].sid().band_env
    assert np.all(np.abs(env[1:-1] + 40) <= 2)
