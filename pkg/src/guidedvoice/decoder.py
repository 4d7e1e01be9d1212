"""Frame-stream decoder with comfort-noise generation and a state sidecar."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import framestream as fs
from . import spectral
from .uplink import from_int16, to_int16

CNG_SMOOTHING = 0.8
CONCEALMENT_DB = -3.0
DEFAULT_SEED = 1234
FLOOR_ENVELOPE = np.full(spectral.N_BANDS, 10 * np.log10(spectral.EPS))

SQRT_WINDOW = np.sqrt(spectral.WINDOW)


@dataclass
class DecoderState:
    frame_type: fs.FrameCategory
    coding_mode: fs.CodingMode
    cng_envelope: np.ndarray
    pitch_lag: int
    lpc: np.ndarray

    @property
    def vad_active(self) -> bool:
        return self.frame_type is fs.FrameCategory.SPEECH


class CngSynthesizer:
    """Continuous comfort noise, one 20 ms frame at a time.

    Each hop adds a random-phase block with bin magnitudes sqrt(psd * 512),
    tapered by a square-root Hann window so overlapping independent blocks
    keep a constant variance. The half-window tail carries into the next
    frame; without a tail (first CNG frame after speech) one extra block
    starts half a window early so the first sample is fully covered.
    """

    def __init__(self):
        self.tail: np.ndarray | None = None

    def reset(self) -> None:
        self.tail = None

    def frame(self, env, rng_seed, hops: int = 2) -> np.ndarray:
        psd = spectral.expand_envelope(env)
        rng = np.random.default_rng(rng_seed)
        phase = rng.uniform(0, 2 * np.pi, size=(hops + 1, spectral.N_BINS))
        spec = np.sqrt(psd * spectral.NFFT) * np.exp(1j * phase)
        spec[:, 0] = spec[:, 0].real * np.sqrt(2)
        spec[:, -1] = spec[:, -1].real * np.sqrt(2)
        blocks = np.fft.irfft(spec, spectral.NFFT, axis=1)[:, : spectral.WIN_LEN] * SQRT_WINDOW

        n = hops * spectral.HOP
        out = np.zeros(n + spectral.HOP)
        out[: spectral.HOP] = blocks[0, spectral.HOP :] if self.tail is None else self.tail
        for b in range(hops):
            out[b * spectral.HOP : b * spectral.HOP + spectral.WIN_LEN] += blocks[b + 1]
        self.tail = out[n:].copy()
        return out[:n]


def generate_cng(env, rng_seed, hops: int = 2) -> np.ndarray:
    """Comfort noise for ``hops`` hops from a band envelope, starting fresh."""
    return CngSynthesizer().frame(env, rng_seed, hops)


def decode(header: fs.StreamHeader, frames, seed: int = DEFAULT_SEED):
    """Decode to ``(pcm, states)``; pcm is float on the 16-bit grid."""
    frames = list(frames)
    if len(frames) != header.frame_count:
        raise fs.PayloadMismatch(
            f"header announces {header.frame_count} frames, got {len(frames)}"
        )
    out = np.zeros(len(frames) * fs.FRAME_LEN)
    states = []
    env = FLOOR_ENVELOPE.copy()
    have_sid = False
    prev_pcm = np.zeros(fs.FRAME_LEN)
    pitch, lpc = 0, np.zeros(fs.LPC_ORDER)
    attenuation = 10 ** (CONCEALMENT_DB / 20)
    cng = CngSynthesizer()

    for i, frame in enumerate(frames):
        cat = frame.category
        mode = frame.toc.coding_mode
        if cat is fs.FrameCategory.SPEECH:
            sp = frame.speech()
            pcm = from_int16(sp.pcm)
            pitch, lpc = sp.pitch_lag, sp.lpc.astype(float)
        elif cat is fs.FrameCategory.SPEECH_LOST:
            pcm = from_int16(to_int16(prev_pcm * attenuation))
        else:
            if cat is fs.FrameCategory.SID:
                received = frame.sid().band_env.astype(float)
                if have_sid:
                    env = CNG_SMOOTHING * env + (1 - CNG_SMOOTHING) * received
                else:
                    env = received
                    have_sid = True
            pcm = from_int16(to_int16(cng.frame(env, (seed, i))))
        if not cat.inactive:
            cng.reset()
        out[i * fs.FRAME_LEN : (i + 1) * fs.FRAME_LEN] = pcm
        states.append(DecoderState(cat, fs.CodingMode(mode), env.copy(), pitch, lpc.copy()))
        prev_pcm = pcm
    return out, states


STATE_FIELDS = (
    ["index", "frame_type", "coding_mode", "pitch_lag"]
    + [f"env{j}" for j in range(spectral.N_BANDS)]
    + [f"lpc{j}" for j in range(fs.LPC_ORDER)]
)


def write_states_csv(path, states) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATE_FIELDS)
        for i, s in enumerate(states):
            w.writerow(
                [i, s.frame_type.value, s.coding_mode.name, s.pitch_lag]
                + [repr(float(v)) for v in s.cng_envelope]
                + [repr(float(v)) for v in s.lpc]
            )


def read_states_csv(path) -> list[DecoderState]:
    states = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != STATE_FIELDS:
            raise ValueError(f"{path}: unexpected state CSV header")
        for i, row in enumerate(reader):
            if int(row["index"]) != i:
                raise ValueError(f"{path}: row {i} has index {row['index']}")
            states.append(
                DecoderState(
                    frame_type=fs.FrameCategory(row["frame_type"]),
                    coding_mode=fs.CodingMode[row["coding_mode"]],
                    cng_envelope=np.array([float(row[f"env{j}"]) for j in range(spectral.N_BANDS)]),
                    pitch_lag=int(row["pitch_lag"]),
                    lpc=np.array([float(row[f"lpc{j}"]) for j in range(fs.LPC_ORDER)]),
                )
            )
    return states
