"""Mono 16-bit 16 kHz WAV I/O on top of the standard library ``wave`` module."""

from __future__ import annotations

import wave

import numpy as np

from .uplink import from_int16, to_int16

SAMPLE_RATE = 16000


class WavFormatError(ValueError):
    pass


def read_wav(path) -> np.ndarray:
    """Return samples as floats in [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as w:
            rate, channels, width = w.getframerate(), w.getnchannels(), w.getsampwidth()
            if (rate, channels, width) != (SAMPLE_RATE, 1, 2):
                raise WavFormatError(
                    f"{path}: need 16 kHz mono 16-bit, got {rate} Hz, "
                    f"{channels} channel(s), {8 * width}-bit"
                )
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    return from_int16(np.frombuffer(raw, dtype="<i2"))


def write_wav(path, samples) -> None:
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(SAMPLE_RATE)
        w.writeframes(to_int16(samples).astype("<i2").tobytes())
