"""Short-time spectral analysis and synthesis shared by every stage.

Hann analysis window of 320 samples, hop 160, zero-padded 512-point FFT. The
periodic Hann window sums to exactly one at 50 % overlap, so synthesis is a
plain overlap-add of the inverse transforms.

Bins are scaled by ``1 / sqrt(sum(w**2))`` so that ``power`` reads as a
per-bin power spectral density in full-scale units: white noise of variance
``s2`` analyzes to a mean power of ``s2`` in every bin, and a band envelope in
dB is directly comparable with a time-domain level in dBFS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WIN_LEN = 320
HOP = 160
NFFT = 512
N_BINS = NFFT // 2 + 1
EPS = 1e-12

WINDOW = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(WIN_LEN) / WIN_LEN)
SCALE = np.sqrt(np.sum(WINDOW**2))

# 20 contiguous groups over bins 0..256: 16 x 13 bins then 4 x 12 bins,
# with the single remaining bin folded into the last band.
BAND_SIZES = (13,) * 16 + (12, 12, 12, 13)
BAND_EDGES = np.concatenate(([0], np.cumsum(BAND_SIZES)))
N_BANDS = len(BAND_SIZES)
BIN_TO_BAND = np.repeat(np.arange(N_BANDS), BAND_SIZES)

assert BAND_EDGES[-1] == N_BINS


@dataclass
class SpectralFrame:
    bins: np.ndarray
    hop_index: int

    @property
    def power(self) -> np.ndarray:
        return self.bins.real**2 + self.bins.imag**2


def n_hops(n_samples: int) -> int:
    return -(-n_samples // HOP)


def stft(samples) -> np.ndarray:
    """Return the (hops, 257) complex STFT matrix; hop h covers [160h, 160h+320)."""
    x = np.asarray(samples, dtype=float)
    hops = n_hops(len(x))
    padded = np.zeros(hops * HOP + WIN_LEN)
    padded[: len(x)] = x
    idx = np.arange(hops)[:, None] * HOP + np.arange(WIN_LEN)[None, :]
    return np.fft.rfft(padded[idx] * WINDOW, NFFT, axis=1) / SCALE


def istft(bins: np.ndarray, length: int | None = None) -> np.ndarray:
    bins = np.asarray(bins)
    hops = bins.shape[0]
    blocks = np.fft.irfft(bins * SCALE, NFFT, axis=1)[:, :WIN_LEN]
    out = np.zeros(hops * HOP + WIN_LEN)
    for h in range(hops):
        out[h * HOP : h * HOP + WIN_LEN] += blocks[h]
    n = hops * HOP if length is None else length
    return out[:n]


def analyze(samples) -> list[SpectralFrame]:
    return [SpectralFrame(row, h) for h, row in enumerate(stft(samples))]


def synthesize(frames, length: int | None = None) -> np.ndarray:
    """Overlap-add inverse of :func:`analyze`.

    Every sample from index 160 on is reconstructed exactly for unmodified
    frames; the first half hop only sees the rising half of the first window.
    """
    frames = list(frames)
    if not frames:
        return np.zeros(length or 0)
    return istft(np.stack([f.bins for f in frames]), length)


def band_energies(power) -> np.ndarray:
    """Mean power per band in dB, floored at 10*log10(1e-12)."""
    power = np.asarray(power, dtype=float)
    means = np.add.reduceat(power, BAND_EDGES[:-1], axis=-1) / np.asarray(BAND_SIZES)
    return 10 * np.log10(means + EPS)


def expand_envelope(energies_db) -> np.ndarray:
    """Piecewise-constant per-bin PSD from a 20-band dB envelope."""
    env = np.asarray(energies_db, dtype=float)
    return 10 ** (env[..., BIN_TO_BAND] / 10)
