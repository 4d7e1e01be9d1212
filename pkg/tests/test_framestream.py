import io

import numpy as np
import pytest
from hypothesis import given, settings

from guidedvoice import framestream as fs

from strategies import frame_streams, records


def test_toc_examples():
    sid = fs.parse_toc(0x0C)
    assert (sid.coding_mode, sid.quality_bit, sid.rate_code) == (fs.CodingMode.VOICE, False, 12)
    assert fs.category(sid) is fs.FrameCategory.SID
    speech = fs.parse_toc(0x10)
    assert (speech.quality_bit, speech.rate_code) == (True, 0)
    assert fs.category(speech) is fs.FrameCategory.SPEECH
    with pytest.raises(fs.InvalidRateCode):
        fs.parse_toc(0x0F)


@pytest.mark.parametrize("rate,cat", [
    (3, fs.FrameCategory.SPEECH), (11, fs.FrameCategory.SPEECH), (12, fs.FrameCategory.SID),
    (13, fs.FrameCategory.NO_DATA), (14, fs.FrameCategory.SPEECH_LOST),
])
def test_category_table(rate, cat):
    assert fs.category(fs.Toc(rate_code=rate)) is cat


def test_all_valid_toc_bytes_round_trip():
    # every byte with reserved bits clear and rate code != 15
    n = 0
    for b in range(64):
        if b & 0x0F == 15:
            with pytest.raises(fs.InvalidRateCode):
                fs.parse_toc(b)
            continue
        assert fs.serialize_toc(fs.parse_toc(b)) == b
        n += 1
    assert n == 60


@pytest.mark.parametrize("b", [0x40, 0x80, 0xC0, 0x4C])
def test_reserved_bits_rejected(b):
    with pytest.raises(fs.ReservedBitSet):
        fs.parse_toc(b)


def test_serialize_rejects_reserved_and_invalid():
    with pytest.raises(fs.ReservedBitSet):
        fs.serialize_toc(fs.Toc(header_bit=True))
    with pytest.raises(fs.InvalidRateCode):
        fs.serialize_toc(fs.Toc(rate_code=15))
    with pytest.raises(fs.InvalidRateCode):
        fs.Toc(rate_code=16)


def _speech():
    return fs.speech_frame(80, np.linspace(-0.5, 0.5, 16), np.arange(320, dtype=np.int16))


def test_stream_sizes():
    buf = io.BytesIO()
    assert fs.write_stream(fs.StreamHeader(0), [], buf) == 14
    assert fs.write_stream(fs.StreamHeader(1), [fs.no_data_frame()], io.BytesIO()) == 17
    assert fs.write_stream(fs.StreamHeader(1), [_speech()], io.BytesIO()) == 14 + 3 + 706


def test_speech_payload_contents():
    rec = _speech()
    sp = rec.speech()
    assert sp.pitch_lag == 80
    assert sp.lpc.dtype == np.float32 and np.allclose(sp.lpc, np.linspace(-0.5, 0.5, 16))
    assert np.array_equal(sp.pcm, np.arange(320, dtype=np.int16))


def test_sid_quantization_clips_to_int8_range():
    env = np.linspace(-200, 10, 20)
    got = fs.unpack_sid(fs.pack_sid(env)).band_env
    assert got.min() == -127 and got.max() == 0
    assert got.dtype == np.int8


def test_speech_lost_quality_bit_clear():
    assert fs.speech_lost_frame().toc.quality_bit is False


def test_truncated_stream():
    data = fs.dumps(fs.StreamHeader(1), [_speech()])
    with pytest.raises(fs.TruncatedStream):
        fs.loads(data[:-10])
    with pytest.raises(fs.TruncatedStream):
        fs.loads(data[:8])


def test_bad_magic():
    data = b"XXXX" + fs.dumps(fs.StreamHeader(0), [])[4:]
    with pytest.raises(fs.BadMagic):
        fs.loads(data)


def test_payload_length_mismatch():
    bad = fs.FrameRecord(fs.Toc(rate_code=fs.SID_RATE_CODE), b"\x00" * 3)
    with pytest.raises(fs.PayloadMismatch):
        fs.dumps(fs.StreamHeader(1), [bad])


def test_frame_count_mismatch():
    with pytest.raises(fs.PayloadMismatch):
        fs.dumps(fs.StreamHeader(2), [fs.no_data_frame()])


def test_unsupported_format():
    with pytest.raises(fs.UnsupportedFormat):
        fs.dumps(fs.StreamHeader(0, sample_rate=8000), [])


def test_save_load(tmp_path):
    frames = [_speech(), fs.sid_frame(np.full(20, -40.0)), fs.no_data_frame()]
    p = tmp_path / "s.gvf"
    fs.save(p, fs.StreamHeader(3), frames)
    header, got = fs.load(p)
    assert header.frame_count == 3
    assert got == frames


@settings(max_examples=300, deadline=None)
@given(frame_streams())
def test_round_trip_property(stream):
    header, frames = stream
    data = fs.dumps(header, frames)
    h2, f2 = fs.loads(data)
    assert h2 == header
    assert f2 == frames
    assert fs.dumps(h2, f2) == data


@settings(max_examples=200, deadline=None)
@given(records)
def test_record_category_matches_payload(rec):
    assert len(rec.payload) == fs.payload_length(rec.category)
