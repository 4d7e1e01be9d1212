"""Simulated encoder front end: VAD, DTX/SID, LPC, pitch and voice/music mode.

The coding itself is an identity (SPEECH frames carry 16-bit PCM); what is
simulated faithfully is the side information a DTX voice coder produces:
frame types on a SID/NO_DATA cadence, a band noise envelope for comfort noise,
pitch, LPC and a voice/music coding-mode decision.
"""

from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import framestream as fs
from . import spectral

FLOOR_DB = -120.0


class DegenerateFrame(ValueError):
    pass


@dataclass
class EncoderConfig:
    vad_margin_db: float = 6.0
    vad_gate_db: float = -60.0
    hangover_frames: int = 5
    vad_history: int = 100
    sid_period: int = 8
    sid_alpha: float = 0.9
    flux_threshold: float = 0.10
    flux_history: int = 50
    hysteresis_hops: int = 25
    music_gate_db: float = -60.0
    lpc_order: int = fs.LPC_ORDER


def to_int16(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    return np.clip(np.rint(x * 32768.0), -32768, 32767).astype(np.int16)


def from_int16(pcm) -> np.ndarray:
    return np.asarray(pcm, dtype=np.int16).astype(float) / 32768.0


def frame_energy_db(frame) -> float:
    frame = np.asarray(frame, dtype=float)
    return 10 * np.log10(np.mean(frame**2) + 1e-12)


# --------------------------------------------------------------------------- VAD


@dataclass
class VadState:
    history: deque = field(default_factory=lambda: deque(maxlen=100))
    hangover_remaining: int = 0

    @property
    def noise_floor_db(self) -> float:
        return min(self.history) if self.history else FLOOR_DB


def vad_raw(energy_db: float, floor_db: float, cfg: EncoderConfig) -> bool:
    return energy_db > floor_db + cfg.vad_margin_db and energy_db > cfg.vad_gate_db


def vad_update(frame, state: VadState, cfg: EncoderConfig | None = None) -> bool:
    """Decide one frame in place.

    The frame's own energy joins the history before the floor is read, so a
    stream that opens on stationary noise is not flagged active on frame 0.
    """
    cfg = cfg or EncoderConfig()
    energy = frame_energy_db(frame)
    state.history.append(energy)
    raw = vad_raw(energy, state.noise_floor_db, cfg)
    if raw:
        state.hangover_remaining = cfg.hangover_frames
        return True
    if state.hangover_remaining > 0:
        state.hangover_remaining -= 1
        return True
    return False


def vad_decide(frame, state: VadState, cfg: EncoderConfig | None = None) -> tuple[bool, VadState]:
    state = copy.deepcopy(state)
    return vad_update(frame, state, cfg), state


def new_vad_state(cfg: EncoderConfig | None = None) -> VadState:
    cfg = cfg or EncoderConfig()
    return VadState(deque(maxlen=cfg.vad_history))


# --------------------------------------------------------------------------- LPC


def levinson(r, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Levinson-Durbin recursion.

    Returns predictor coefficients ``a`` (``x[n] ~ sum a[i] x[n-1-i]``) and the
    reflection coefficients.
    """
    r = np.asarray(r, dtype=float)
    a = np.zeros(order)
    k = np.zeros(order)
    err = r[0]
    for m in range(order):
        acc = r[m + 1] - np.dot(a[:m], r[m:0:-1])
        km = acc / err
        if not abs(km) < 1:
            raise ArithmeticError(f"unstable reflection coefficient {km} at order {m + 1}")
        k[m] = km
        a[:m] = a[:m] - km * a[:m][::-1]
        a[m] = km
        err *= 1 - km * km
    return a, k


def autocorrelation(frame, max_lag: int) -> np.ndarray:
    x = np.asarray(frame, dtype=float)
    full = np.correlate(x, x, mode="full")
    return full[len(x) - 1 : len(x) + max_lag]


def analyze_lpc(frame, order: int = fs.LPC_ORDER, strict: bool = False) -> np.ndarray:
    """LPC by the autocorrelation method, lag 0 regularized by (1 + 1e-4).

    Frames with energy below 1e-12 have no meaningful predictor; they yield
    zero coefficients, or raise :class:`DegenerateFrame` when ``strict``.
    """
    x = np.asarray(frame, dtype=float)
    if np.sum(x**2) < 1e-12:
        if strict:
            raise DegenerateFrame("frame energy below 1e-12")
        return np.zeros(order)
    r = autocorrelation(x, order)
    r[0] *= 1 + 1e-4
    a, _ = levinson(r, order)
    return a


# ------------------------------------------------------------------------- pitch

MIN_LAG = 32
MAX_LAG = fs.MAX_PITCH_LAG
MIN_OVERLAP = 32


def normalized_autocorrelation(buf, lags) -> np.ndarray:
    x = np.asarray(buf, dtype=float)
    n = len(x)
    full = np.correlate(x, x, mode="full")[n - 1 :]
    cum = np.concatenate(([0.0], np.cumsum(x**2)))
    out = np.zeros(len(lags))
    for i, lag in enumerate(lags):
        if n - lag < MIN_OVERLAP:
            continue
        e_head = cum[n - lag]
        e_tail = cum[n] - cum[lag]
        denom = np.sqrt(e_head * e_tail)
        if denom > 0:
            out[i] = full[lag] / denom
    return out


def estimate_pitch(frame, history=None, threshold: float = 0.5) -> int:
    """Pitch lag in samples over 32..400, or 0 when unvoiced.

    ``history`` (typically the previous frame) extends the buffer so that long
    lags get enough overlap. Among lags within 5 % of the correlation peak the
    shortest local maximum wins, which avoids picking a multiple of the period.
    """
    buf = np.asarray(frame, dtype=float)
    if history is not None:
        buf = np.concatenate((np.asarray(history, dtype=float), buf))
    lags = np.arange(MIN_LAG, MAX_LAG + 1)
    r = normalized_autocorrelation(buf, lags)
    peak = r.max()
    if peak < threshold:
        return 0
    padded = np.concatenate(([-np.inf], r, [-np.inf]))
    for i in range(len(r)):
        if r[i] >= 0.95 * peak and r[i] >= padded[i] and r[i] >= padded[i + 2]:
            return int(lags[i])
    return int(lags[np.argmax(r)])


# -------------------------------------------------------------------- classifier


@dataclass
class ClassifierState:
    flux_history: deque = field(default_factory=lambda: deque(maxlen=50))
    mode: fs.CodingMode = fs.CodingMode.VOICE
    run_length: int = 0
    prev_magnitude: np.ndarray | None = None


def spectral_flux(magnitude, prev_magnitude) -> float:
    total = np.sum(magnitude)
    if prev_magnitude is None or total <= 0:
        return 0.0
    return float(np.sum(np.maximum(0.0, magnitude - prev_magnitude)) / total)


def classify_update(power, state: ClassifierState, cfg: EncoderConfig | None = None) -> fs.CodingMode:
    cfg = cfg or EncoderConfig()
    magnitude = np.sqrt(np.asarray(power, dtype=float))
    if state.prev_magnitude is not None:
        state.flux_history.append(spectral_flux(magnitude, state.prev_magnitude))
    state.prev_magnitude = magnitude

    energy_db = 10 * np.log10(np.mean(power) + 1e-12)
    if energy_db <= cfg.music_gate_db or not state.flux_history:
        return state.mode
    music = np.mean(state.flux_history) < cfg.flux_threshold
    evidence = fs.CodingMode.MUSIC if music else fs.CodingMode.VOICE
    if evidence == state.mode:
        state.run_length = 0
    else:
        state.run_length += 1
        if state.run_length >= cfg.hysteresis_hops:
            state.mode = evidence
            state.run_length = 0
    return state.mode


def classify_mode(frame: spectral.SpectralFrame, state: ClassifierState,
                  cfg: EncoderConfig | None = None) -> tuple[fs.CodingMode, ClassifierState]:
    state = copy.deepcopy(state)
    return classify_update(frame.power, state, cfg), state


def new_classifier_state(cfg: EncoderConfig | None = None) -> ClassifierState:
    cfg = cfg or EncoderConfig()
    return ClassifierState(deque(maxlen=cfg.flux_history))


# ------------------------------------------------------------------------ encode


def encode(samples, dtx: bool = True, cfg: EncoderConfig | None = None):
    """Encode PCM in [-1, 1] to ``(StreamHeader, [FrameRecord, ...])``.

    Samples are quantized to 16 bits first and every analysis runs on the
    quantized signal, so encoding a WAV file and encoding the float array it
    was written from give the same stream.
    """
    cfg = cfg or EncoderConfig()
    pcm = to_int16(samples)
    n_frames = -(-len(pcm) // fs.FRAME_LEN)
    padded = np.zeros(n_frames * fs.FRAME_LEN, dtype=np.int16)
    padded[: len(pcm)] = pcm
    x = from_int16(padded)

    power = np.abs(spectral.stft(x)) ** 2 if n_frames else np.zeros((0, spectral.N_BINS))
    vad = new_vad_state(cfg)
    classifier = new_classifier_state(cfg)
    noise_psd = None
    inactive_run = 0
    prev = np.zeros(fs.FRAME_LEN)
    frames = []

    for i in range(n_frames):
        sl = slice(i * fs.FRAME_LEN, (i + 1) * fs.FRAME_LEN)
        frame = x[sl]
        for h in (2 * i, 2 * i + 1):
            mode = classify_update(power[h], classifier, cfg)
        active = vad_update(frame, vad, cfg)

        if active or not dtx:
            inactive_run = 0
            lpc = analyze_lpc(frame, cfg.lpc_order)
            pitch = estimate_pitch(frame, history=prev)
            frames.append(fs.speech_frame(pitch, lpc, padded[sl], mode))
        else:
            frame_psd = power[2 * i : 2 * i + 2].mean(axis=0)
            if noise_psd is None:
                noise_psd = frame_psd
            else:
                noise_psd = cfg.sid_alpha * noise_psd + (1 - cfg.sid_alpha) * frame_psd
            if inactive_run % cfg.sid_period == 0:
                frames.append(fs.sid_frame(spectral.band_energies(noise_psd), mode))
            else:
                frames.append(fs.no_data_frame(mode))
            inactive_run += 1
        prev = frame

    return fs.StreamHeader(frame_count=len(frames)), frames
