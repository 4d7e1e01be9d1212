import csv

import numpy as np
import pytest

from guidedvoice import cli, framestream
from guidedvoice.wavio import read_wav, write_wav


@pytest.fixture
def run(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)

    def _run(*argv):
        return cli.main([str(a) for a in argv])

    return _run


@pytest.fixture
def noisy(run, tmp_path):
    assert run("gen", "speech_like", "noisy.wav", "--duration", 4, "--noise", "white",
               "--snr", 10, "--labels", "labels.csv") == 0
    return tmp_path / "noisy.wav"


def test_gen_is_bit_identical(run, tmp_path):
    assert run("gen", "mixed", "a.wav", "--duration", 3, "--seed", 4) == 0
    assert run("gen", "mixed", "b.wav", "--duration", 3, "--seed", 4) == 0
    assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()
    assert len(read_wav(tmp_path / "a.wav")) == 3 * 16000


def test_encode_decode_enhance_chain(run, noisy, tmp_path):
    assert run("encode", noisy, "s.gvf") == 0
    header, frames = framestream.load(tmp_path / "s.gvf")
    assert header.frame_count == 200
    assert run("decode", "s.gvf", "dec.wav", "--states", "states.csv") == 0
    assert run("enhance", "dec.wav", "g.wav", "--mode", "guided", "--states", "states.csv",
               "--trace", "tr") == 0
    assert run("enhance", "dec.wav", "g2.wav", "--mode", "guided", "--stream", "s.gvf") == 0
    assert (tmp_path / "g.wav").read_bytes() == (tmp_path / "g2.wav").read_bytes()
    assert (tmp_path / "tr_nr.csv").exists() and (tmp_path / "tr_mdrp.csv").exists()


def test_no_dtx_stream_is_all_speech(run, noisy, tmp_path):
    assert run("encode", noisy, "s.gvf", "--no-dtx") == 0
    _, frames = framestream.load(tmp_path / "s.gvf")
    assert all(f.category is framestream.FrameCategory.SPEECH for f in frames)


def test_unguided_needs_no_stream(run, noisy):
    assert run("enhance", noisy, "u.wav", "--modules", "nr") == 0


def test_exit_codes(run, noisy, tmp_path):
    assert run("enhance", noisy, "o.wav", "--mode", "guided") == cli.EXIT_USAGE
    assert run("enhance", noisy, "o.wav", "--modules", "eq") == cli.EXIT_USAGE
    assert run("frobnicate") == cli.EXIT_USAGE
    assert run("encode", "missing.wav", "o.gvf") == cli.EXIT_NOT_FOUND
    (tmp_path / "bad.wav").write_bytes(b"garbage")
    assert run("encode", "bad.wav", "o.gvf") == cli.EXIT_FORMAT
    (tmp_path / "bad.gvf").write_bytes(b"GVF1" + b"\x00" * 3)
    assert run("decode", "bad.gvf", "o.wav") == cli.EXIT_FORMAT
    (tmp_path / "bad.cfg").write_text("nonsense = 1\n")
    assert run("enhance", noisy, "o.wav", "--config", "bad.cfg") == cli.EXIT_FORMAT


def test_misaligned_states_exit(run, noisy, tmp_path):
    assert run("encode", noisy, "s.gvf") == 0
    assert run("decode", "s.gvf", "dec.wav", "--states", "states.csv") == 0
    short = tmp_path / "short.wav"
    write_wav(short, read_wav(tmp_path / "dec.wav")[:-640])
    assert run("enhance", short, "o.wav", "--mode", "guided",
               "--states", "states.csv") == cli.EXIT_MISALIGNED


def test_compare_outputs(run, tmp_path):
    assert run("compare", "--duration", 6, "--noises", "white,pink", "--out-dir", "rep",
               "--quiet") == 0
    rep = tmp_path / "rep"
    rows = list(csv.DictReader((rep / "report.csv").open()))
    assert [r["noise_type"] for r in rows] == ["white", "pink"]
    assert all(float(r["improvement_db"]) > 0 for r in rows)
    for name in ("suppression.png", "residual_white.png", "spectrogram_pink.png",
                 "nr_trace_guided_white.csv", "residual_pink.csv", "summary.csv"):
        assert (rep / name).stat().st_size > 0


def test_compare_unknown_noise(run):
    assert run("compare", "--noises", "white,hail", "--out-dir", "rep") == cli.EXIT_USAGE


def test_chain_matches_compare(run, tmp_path):
    args = ("--duration", 5, "--seed", 2)
    assert run("gen", "speech_like", "n.wav", "--noise", "pink", "--snr", 10, *args) == 0
    assert run("encode", "n.wav", "s.gvf") == 0
    assert run("decode", "s.gvf", "d.wav", "--states", "st.csv") == 0
    assert run("enhance", "d.wav", "g.wav", "--mode", "guided", "--states", "st.csv",
               "--modules", "nr") == 0
    assert run("compare", "--noises", "pink", "--snr", 10, *args, "--out-dir", "rep",
               "--wavs", "--no-figures", "--quiet") == 0
    assert np.array_equal(read_wav(tmp_path / "g.wav"), read_wav(tmp_path / "rep" / "guided_pink.wav"))


def test_compare_with_clean_file(run, tmp_path):
    assert run("gen", "mixed", "c.wav", "--duration", 12, "--labels", "l.csv") == 0
    assert run("compare", "--clean", "c.wav", "--labels", "l.csv", "--noises", "white",
               "--snr", 30, "--out-dir", "rep", "--no-figures", "--quiet") == 0
    row = next(csv.DictReader((tmp_path / "rep" / "summary.csv").open()))
    assert row["music_lsd_guided_db"] and row["music_lsd_unguided_db"]
    assert run("compare", "--clean", "c.wav", "--out-dir", "rep") == cli.EXIT_USAGE
