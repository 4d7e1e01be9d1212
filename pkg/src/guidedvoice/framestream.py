"""On-disk frame-stream container (``.gvf``).

Layout, all multi-byte integers little-endian::

    +-------+-------------+-----------+-------------+
    | magic | sample_rate | frame_len | frame_count |   14 byte header
    | 4B    | u32         | u16       | u32         |
    +-------+-------------+-----------+-------------+

followed by ``frame_count`` records::

    +-----+-------------+---------+
    | ToC | payload_len | payload |
    | 1B  | u16         | n bytes |
    +-----+-------------+---------+

ToC byte, MSB first::

    b7 header_bit (0) | b6 followed_bit (0) | b5 coding_mode | b4 quality | b3..b0 rate_code

rate_code 0..11 is active speech, 12 SID, 13 NO_DATA, 14 SPEECH_LOST and 15 is
invalid.

Payloads:

* SPEECH: u16 pitch lag, 16 x float32 LPC coefficients, 320 x int16 PCM (706 bytes)
* SID: 20 x int8 band log-energies in dB, clamped to [-127, 0] (20 bytes)
* NO_DATA, SPEECH_LOST: empty
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import BinaryIO, Iterable

import numpy as np

MAGIC = b"GVF1"
SAMPLE_RATE = 16000
FRAME_LEN = 320
LPC_ORDER = 16
N_BANDS = 20
MAX_PITCH_LAG = 400

HEADER = struct.Struct("<4sIHI")
RECORD_PREFIX = struct.Struct("<BH")

SID_RATE_CODE = 12
NO_DATA_RATE_CODE = 13
SPEECH_LOST_RATE_CODE = 14
INVALID_RATE_CODE = 15

SPEECH_PAYLOAD_LEN = 2 + 4 * LPC_ORDER + 2 * FRAME_LEN
SID_PAYLOAD_LEN = N_BANDS


class FrameStreamError(ValueError):
    """Base class for malformed frame streams."""


class ReservedBitSet(FrameStreamError):
    pass


class InvalidRateCode(FrameStreamError):
    pass


class PayloadMismatch(FrameStreamError):
    pass


class BadMagic(FrameStreamError):
    pass


class TruncatedStream(FrameStreamError):
    pass


class UnsupportedFormat(FrameStreamError):
    pass


class CodingMode(IntEnum):
    VOICE = 0
    MUSIC = 1


class FrameCategory(Enum):
    SPEECH = "SPEECH"
    SID = "SID"
    NO_DATA = "NO_DATA"
    SPEECH_LOST = "SPEECH_LOST"

    @property
    def inactive(self) -> bool:
        return self in (FrameCategory.SID, FrameCategory.NO_DATA)


@dataclass(frozen=True)
class Toc:
    coding_mode: CodingMode = CodingMode.VOICE
    quality_bit: bool = True
    rate_code: int = 0
    header_bit: bool = False
    followed_bit: bool = False

    def __post_init__(self):
        if not 0 <= self.rate_code <= 15:
            raise InvalidRateCode(f"rate code {self.rate_code} does not fit in 4 bits")


def parse_toc(b: int) -> Toc:
    """Decode one ToC byte, rejecting reserved bits and rate code 15."""
    if not 0 <= b <= 0xFF:
        raise ValueError(f"ToC must be a single byte, got {b}")
    if b & 0xC0:
        raise ReservedBitSet(f"reserved ToC bits set in 0x{b:02X}")
    rate_code = b & 0x0F
    if rate_code == INVALID_RATE_CODE:
        raise InvalidRateCode(f"rate code 15 in ToC 0x{b:02X}")
    return Toc(
        coding_mode=CodingMode((b >> 5) & 1),
        quality_bit=bool((b >> 4) & 1),
        rate_code=rate_code,
    )


def serialize_toc(toc: Toc) -> int:
    if toc.header_bit or toc.followed_bit:
        raise ReservedBitSet("reserved ToC bits must be 0")
    if toc.rate_code == INVALID_RATE_CODE:
        raise InvalidRateCode("rate code 15 is not serializable")
    return (int(toc.coding_mode) << 5) | (int(toc.quality_bit) << 4) | toc.rate_code


def category(toc: Toc) -> FrameCategory:
    if toc.rate_code <= 11:
        return FrameCategory.SPEECH
    if toc.rate_code == SID_RATE_CODE:
        return FrameCategory.SID
    if toc.rate_code == NO_DATA_RATE_CODE:
        return FrameCategory.NO_DATA
    if toc.rate_code == SPEECH_LOST_RATE_CODE:
        return FrameCategory.SPEECH_LOST
    raise InvalidRateCode(f"rate code {toc.rate_code}")


def payload_length(cat: FrameCategory) -> int:
    if cat is FrameCategory.SPEECH:
        return SPEECH_PAYLOAD_LEN
    if cat is FrameCategory.SID:
        return SID_PAYLOAD_LEN
    return 0


@dataclass(frozen=True)
class StreamHeader:
    frame_count: int
    sample_rate: int = SAMPLE_RATE
    frame_len: int = FRAME_LEN
    magic: bytes = MAGIC


@dataclass(frozen=True)
class SpeechPayload:
    pitch_lag: int
    lpc: np.ndarray  # float32, LPC_ORDER
    pcm: np.ndarray  # int16, FRAME_LEN

    def __eq__(self, other):
        if not isinstance(other, SpeechPayload):
            return NotImplemented
        return (
            self.pitch_lag == other.pitch_lag
            and np.array_equal(self.lpc, other.lpc)
            and np.array_equal(self.pcm, other.pcm)
        )


@dataclass(frozen=True)
class SidPayload:
    band_env: np.ndarray  # int8, N_BANDS

    def __eq__(self, other):
        if not isinstance(other, SidPayload):
            return NotImplemented
        return np.array_equal(self.band_env, other.band_env)


@dataclass(frozen=True)
class FrameRecord:
    toc: Toc
    payload: bytes = field(default=b"")

    @property
    def category(self) -> FrameCategory:
        return category(self.toc)

    def speech(self) -> SpeechPayload:
        return unpack_speech(self.payload)

    def sid(self) -> SidPayload:
        return unpack_sid(self.payload)


def pack_speech(pitch_lag: int, lpc, pcm) -> bytes:
    if not 0 <= pitch_lag <= MAX_PITCH_LAG:
        raise PayloadMismatch(f"pitch lag {pitch_lag} outside 0..{MAX_PITCH_LAG}")
    lpc = np.asarray(lpc, dtype="<f4")
    pcm = np.asarray(pcm)
    if lpc.shape != (LPC_ORDER,) or pcm.shape != (FRAME_LEN,):
        raise PayloadMismatch("SPEECH payload needs 16 LPC coefficients and 320 samples")
    if pcm.dtype != np.int16:
        raise PayloadMismatch(f"SPEECH pcm must be int16, got {pcm.dtype}")
    return struct.pack("<H", pitch_lag) + lpc.tobytes() + pcm.astype("<i2").tobytes()


def unpack_speech(payload: bytes) -> SpeechPayload:
    if len(payload) != SPEECH_PAYLOAD_LEN:
        raise PayloadMismatch(f"SPEECH payload has {len(payload)} bytes")
    (pitch_lag,) = struct.unpack_from("<H", payload)
    lpc = np.frombuffer(payload, dtype="<f4", count=LPC_ORDER, offset=2)
    pcm = np.frombuffer(payload, dtype="<i2", count=FRAME_LEN, offset=2 + 4 * LPC_ORDER)
    return SpeechPayload(pitch_lag, lpc.astype(np.float32), pcm.astype(np.int16))


def pack_sid(band_env_db) -> bytes:
    env = np.clip(np.rint(np.asarray(band_env_db, dtype=float)), -127, 0)
    if env.shape != (N_BANDS,):
        raise PayloadMismatch("SID payload needs 20 band energies")
    return env.astype(np.int8).tobytes()


def unpack_sid(payload: bytes) -> SidPayload:
    if len(payload) != SID_PAYLOAD_LEN:
        raise PayloadMismatch(f"SID payload has {len(payload)} bytes")
    return SidPayload(np.frombuffer(payload, dtype=np.int8).copy())


def speech_frame(pitch_lag: int, lpc, pcm, coding_mode=CodingMode.VOICE) -> FrameRecord:
    return FrameRecord(Toc(coding_mode=CodingMode(coding_mode), rate_code=0),
                       pack_speech(pitch_lag, lpc, pcm))


def sid_frame(band_env_db, coding_mode=CodingMode.VOICE) -> FrameRecord:
    return FrameRecord(Toc(coding_mode=CodingMode(coding_mode), rate_code=SID_RATE_CODE),
                       pack_sid(band_env_db))


def no_data_frame(coding_mode=CodingMode.VOICE) -> FrameRecord:
    return FrameRecord(Toc(coding_mode=CodingMode(coding_mode), rate_code=NO_DATA_RATE_CODE))


def speech_lost_frame() -> FrameRecord:
    return FrameRecord(Toc(quality_bit=False, rate_code=SPEECH_LOST_RATE_CODE))


def _check_header(header: StreamHeader) -> None:
    if header.magic != MAGIC:
        raise BadMagic(f"bad magic {header.magic!r}")
    if header.sample_rate != SAMPLE_RATE or header.frame_len != FRAME_LEN:
        raise UnsupportedFormat(
            f"only {SAMPLE_RATE} Hz / {FRAME_LEN}-sample frames are supported, "
            f"got {header.sample_rate} Hz / {header.frame_len}"
        )


def write_stream(header: StreamHeader, frames: Iterable[FrameRecord], sink: BinaryIO) -> int:
    """Serialize a header and its frames to ``sink``; returns bytes written."""
    frames = list(frames)
    _check_header(header)
    if len(frames) != header.frame_count:
        raise PayloadMismatch(
            f"header announces {header.frame_count} frames, got {len(frames)}"
        )
    written = sink.write(HEADER.pack(header.magic, header.sample_rate,
                                     header.frame_len, header.frame_count))
    for i, frame in enumerate(frames):
        expected = payload_length(frame.category)
        if len(frame.payload) != expected:
            raise PayloadMismatch(
                f"frame {i}: {frame.category.value} payload has {len(frame.payload)} "
                f"bytes, expected {expected}"
            )
        written += sink.write(RECORD_PREFIX.pack(serialize_toc(frame.toc), len(frame.payload)))
        written += sink.write(frame.payload)
    return written


def _read_exact(source: BinaryIO, n: int, what: str) -> bytes:
    data = source.read(n)
    if len(data) != n:
        raise TruncatedStream(f"stream ended inside {what} ({len(data)} of {n} bytes)")
    return data


def read_stream(source: BinaryIO) -> tuple[StreamHeader, list[FrameRecord]]:
    magic = source.read(4)
    if len(magic) == 4 and magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    rest = _read_exact(source, HEADER.size - len(magic), "header")
    _, sample_rate, frame_len, frame_count = HEADER.unpack(magic + rest)
    header = StreamHeader(frame_count, sample_rate, frame_len, magic)
    _check_header(header)

    frames = []
    for i in range(header.frame_count):
        toc_byte, n = RECORD_PREFIX.unpack(_read_exact(source, RECORD_PREFIX.size, f"frame {i} prefix"))
        toc = parse_toc(toc_byte)
        expected = payload_length(category(toc))
        if n != expected:
            raise PayloadMismatch(
                f"frame {i}: {category(toc).value} declares {n} payload bytes, expected {expected}"
            )
        frames.append(FrameRecord(toc, _read_exact(source, n, f"frame {i} payload")))
    return header, frames


def dumps(header: StreamHeader, frames: Iterable[FrameRecord]) -> bytes:
    buf = io.BytesIO()
    write_stream(header, frames, buf)
    return buf.getvalue()


def loads(data: bytes) -> tuple[StreamHeader, list[FrameRecord]]:
    return read_stream(io.BytesIO(data))


def save(path, header: StreamHeader, frames: Iterable[FrameRecord]) -> int:
    with open(path, "wb") as fh:
        return write_stream(header, frames, fh)


def load(path) -> tuple[StreamHeader, list[FrameRecord]]:
    with open(path, "rb") as fh:
        return read_stream(fh)
