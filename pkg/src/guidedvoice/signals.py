"""Deterministic synthetic test vectors, ground-truth labels and a noise bank."""

from __future__ import annotations

import csv
from enum import Enum

import numpy as np
from scipy import signal as sps

FS = 16000
FRAME = 320
SPEECH_LEVEL_DB = -26.0


class Label(Enum):
    SPEECH = "SpeechActive"
    NOISE = "NoiseOnly"
    MUSIC = "Music"


KINDS = ("speech_like", "music_like", "mixed", "silence")


def _formant_filter(rng) -> np.ndarray:
    """Random stable all-pole filter of order 16 from 8 resonances."""
    centers = [
        rng.uniform(300, 800), rng.uniform(900, 2200), rng.uniform(2300, 3000),
        rng.uniform(3300, 4000), 4700, 5600, 6500, 7300,
    ]
    radii = [0.97, 0.96, 0.95, 0.93, 0.85, 0.8, 0.8, 0.75]
    poles = []
    for f, r in zip(centers, radii):
        p = r * np.exp(2j * np.pi * f / FS)
        poles += [p, np.conj(p)]
    return np.poly(poles).real


def _syllable(rng, n: int, f0: float) -> np.ndarray:
    t = np.arange(n)
    # pitch contour with a gentle glide and jitter
    f = f0 * (1 + 0.08 * np.sin(np.pi * t / n + rng.uniform(0, np.pi)))
    phase = np.cumsum(f / FS)
    pulses = np.diff(np.floor(phase), prepend=0.0)
    exc = pulses + 0.03 * rng.standard_normal(n)
    y = sps.lfilter([1.0], _formant_filter(rng), exc)
    y /= np.sqrt(np.mean(y**2)) + 1e-12
    return y * np.hanning(n)


def _speech_burst(rng, n_frames: int) -> np.ndarray:
    out = np.zeros(n_frames * FRAME)
    f0 = rng.uniform(100, 220)
    pos = 0
    while pos < n_frames:
        length = min(int(rng.integers(6, 16)), n_frames - pos)
        if n_frames - pos - length < 4:
            length = n_frames - pos
        out[pos * FRAME : (pos + length) * FRAME] = _syllable(rng, length * FRAME, f0)
        pos += length
    return out


def _chord(rng, n: int) -> np.ndarray:
    # open voicing keeps partials > 100 Hz apart so they do not beat inside
    # one analysis window
    root = 220 * 2 ** (rng.integers(0, 12) / 12)
    t = np.arange(n) / FS
    out = np.zeros(n)
    for step in (0, 7, 16, 24)[: int(rng.integers(3, 5))]:
        f = root * 2 ** (step / 12)
        ph = rng.uniform(0, 2 * np.pi, 3)
        for k in range(1, 4):
            if k * f < FS / 2 - 500:
                out += np.sin(2 * np.pi * k * f * t + ph[k - 1]) / k
    ramp = min(800, n // 4)
    env = np.ones(n)
    env[:ramp] = np.linspace(0, 1, ramp)
    env[-ramp:] = np.linspace(1, 0, ramp)
    return out * env


def _music(rng, n_frames: int) -> np.ndarray:
    out = np.zeros(n_frames * FRAME)
    pos = 0
    while pos < n_frames:
        length = min(int(rng.integers(75, 150)), n_frames - pos)
        out[pos * FRAME : (pos + length) * FRAME] = _chord(rng, length * FRAME)
        pos += length
    return out


def _normalize(x: np.ndarray, mask: np.ndarray, level_db: float) -> np.ndarray:
    if not mask.any():
        return x
    p = np.mean(x[mask] ** 2)
    return x * np.sqrt(10 ** (level_db / 10) / p) if p > 0 else x


def _sample_mask(labels, which) -> np.ndarray:
    return np.repeat(np.array([lb in which for lb in labels]), FRAME)


def generate(kind: str, duration_s: float, seed: int = 0, level_db: float = SPEECH_LEVEL_DB):
    """Return ``(samples, labels)`` with one label per 20 ms frame."""
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    n_frames = int(round(duration_s * FS / FRAME))
    rng = np.random.default_rng(seed)
    x = np.zeros(n_frames * FRAME)
    labels = [Label.NOISE] * n_frames

    def put(start, seg, label):
        n = min(len(seg) // FRAME, n_frames - start)
        x[start * FRAME : (start + n) * FRAME] = seg[: n * FRAME]
        labels[start : start + n] = [label] * n
        return start + n

    if kind == "speech_like":
        pos = int(rng.integers(40, 60))
        while pos < n_frames:
            pos = put(pos, _speech_burst(rng, int(rng.integers(40, 90))), Label.SPEECH)
            pos += int(rng.integers(40, 75))
    elif kind == "music_like":
        put(0, _music(rng, n_frames), Label.MUSIC)
    elif kind == "mixed":
        pos = int(rng.integers(40, 55))
        use_music = False
        while pos < n_frames:
            if use_music:
                pos = put(pos, _music(rng, int(rng.integers(175, 225))), Label.MUSIC)
            else:
                pos = put(pos, _speech_burst(rng, int(rng.integers(50, 90))), Label.SPEECH)
            use_music = not use_music
            pos += int(rng.integers(35, 50))

    speech = _sample_mask(labels, (Label.SPEECH,))
    music = _sample_mask(labels, (Label.MUSIC,))
    x = np.where(speech, _normalize(x, speech, level_db), x)
    x = np.where(music, _normalize(x, music, level_db), x)
    return x, labels


# ------------------------------------------------------------------- noise bank


def _colored(rng, n, exponent: float) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.maximum(np.fft.rfftfreq(n, 1 / FS), 50.0)
    spec[0] = 0
    return np.fft.irfft(spec / f ** (exponent / 2), n)


def _lowpass(x, cutoff, order: int = 1) -> np.ndarray:
    sos = sps.butter(order, cutoff, fs=FS, output="sos")
    return sps.sosfilt(sos, x)


def _smooth_envelope(rng, n, rate_hz: float, depth: float) -> np.ndarray:
    """Positive envelope 1 + depth * smoothed random process in [-1, 1]."""
    knots = rng.uniform(-1, 1, int(n / FS * rate_hz) + 3)
    t = np.arange(n) / FS * rate_hz
    return 1 + depth * np.interp(t, np.arange(len(knots)), knots)


def _bursts(rng, n, rate_hz: float, depth: float) -> np.ndarray:
    """Noise bursts: raised-cosine swells on top of a steady bed."""
    env = np.ones(n)
    t = 0
    while t < n:
        length = int(rng.uniform(0.3, 0.8) * FS)
        start = t + int(rng.exponential(FS / rate_hz))
        seg = np.hanning(length) * depth * rng.uniform(0.5, 1.0)
        end = min(start + length, n)
        if start < n:
            env[start:end] += seg[: end - start]
        t = start + length
    return env


def _unit(x):
    return x / (np.sqrt(np.mean(x**2)) + 1e-20)


def white(rng, n):
    return _unit(rng.standard_normal(n))


def pink(rng, n):
    return _unit(_colored(rng, n, 1.0))


def car(rng, n):
    return _unit(_lowpass(rng.standard_normal(n), 500))


def road(rng, n):
    x = _lowpass(rng.standard_normal(n), 500) + 0.1 * _unit(_colored(rng, n, 1.0))
    return _unit(x * _smooth_envelope(rng, n, 0.5, 0.15))


def train(rng, n):
    return _unit(_unit(_colored(rng, n, 1.0)) * _bursts(rng, n, 0.5, 0.45))


def crossroad(rng, n):
    x = _unit(_lowpass(rng.standard_normal(n), 800)) + 0.5 * _unit(_colored(rng, n, 1.0))
    return _unit(x * _bursts(rng, n, 0.7, 0.45))


def cafeteria(rng, n):
    # babble-ish: band-limited noise with fast syllabic amplitude modulation
    x = _unit(sps.sosfilt(sps.butter(2, (200, 3500), "bandpass", fs=FS, output="sos"),
                          rng.standard_normal(n)))
    return _unit(x * _smooth_envelope(rng, n, 4.0, 0.25))


def wind(rng, n):
    gust_rate = rng.uniform(1, 4)
    return _unit(_lowpass(rng.standard_normal(n), 300) * _smooth_envelope(rng, n, gust_rate, 0.15))


NOISE_BANK = {
    "white": white,
    "pink": pink,
    "car": car,
    "road": road,
    "train": train,
    "crossroad": crossroad,
    "cafeteria": cafeteria,
    "wind": wind,
}


def mix(clean, labels, noise_type: str, snr_db: float, seed: int = 0, noise_level_db=None):
    """Add noise at ``snr_db`` relative to the clean signal's active (non-noise) level.

    With ``noise_level_db`` the noise is set to that absolute level instead.
    Returns ``(noisy, noise)``.
    """
    clean = np.asarray(clean, dtype=float)
    rng = np.random.default_rng([seed, sorted(NOISE_BANK).index(noise_type)])
    noise = NOISE_BANK[noise_type](rng, len(clean))
    if noise_level_db is None:
        active = _sample_mask(labels, (Label.SPEECH, Label.MUSIC))
        if not active.any():
            raise ValueError("no active frames to reference the SNR against")
        noise_level_db = 10 * np.log10(np.mean(clean[active] ** 2)) - snr_db
    noise = noise * 10 ** (noise_level_db / 20)
    return clean + noise, noise


# ----------------------------------------------------------------------- labels


def write_labels(path, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_index", "label"])
        for i, lb in enumerate(labels):
            w.writerow([i, lb.value])


def read_labels(path) -> list[Label]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["frame_index", "label"]:
            raise ValueError(f"{path}: expected header frame_index,label")
        out = []
        for i, row in enumerate(reader):
            if int(row["frame_index"]) != i:
                raise ValueError(f"{path}: row {i} has frame_index {row['frame_index']}")
            out.append(Label(row["label"]))
    return out
