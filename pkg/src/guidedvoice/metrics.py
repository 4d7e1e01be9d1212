"""Measurement harness: suppression, residual traces, detection rates, LSD."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .controller import ControllerConfig, Curve, NoiseSource
from .pipeline import enhance, transmit
from .signals import Label, mix

FRAME = 320
HANGOVER_FRAMES = 5
LSD_FLOOR_DB = -60.0


class NoNoiseFrames(ValueError):
    pass


class NoMusicFrames(ValueError):
    pass


def scored_noise_frames(labels, skip: int = HANGOVER_FRAMES) -> np.ndarray:
    """Indices of NoiseOnly frames, minus the first ``skip`` of every run."""
    keep, run = [], 0
    for i, lb in enumerate(labels):
        if lb is Label.NOISE:
            if run >= skip:
                keep.append(i)
            run += 1
        else:
            run = 0
    return np.array(keep, dtype=int)


def _frame_power(x, frames) -> float:
    x = np.asarray(x, dtype=float)
    idx = (frames[:, None] * FRAME + np.arange(FRAME)[None, :]).ravel()
    return float(np.mean(x[idx] ** 2))


def suppression_db(inp, out, labels, skip: int = HANGOVER_FRAMES) -> float:
    if len(inp) != len(out):
        raise ValueError("input and output lengths differ")
    frames = scored_noise_frames(labels, skip)
    frames = frames[(frames + 1) * FRAME <= len(inp)]
    if frames.size == 0:
        raise NoNoiseFrames("labels contain no scoreable NoiseOnly frame")
    return 10 * np.log10(_frame_power(inp, frames) / max(_frame_power(out, frames), 1e-20))


def residual_trace(out, hop: int = spectral.HOP) -> np.ndarray:
    out = np.asarray(out, dtype=float)
    n = -(-len(out) // hop)
    x = np.zeros(n * hop)
    x[: len(out)] = out
    return 10 * np.log10(np.mean(x.reshape(n, hop) ** 2, axis=1) + 1e-12)


def _frame_detections(trace) -> dict[int, bool]:
    det = {}
    for row in trace:
        if hasattr(row, "silence"):
            if row.hop % 2 == 0:
                det[row.hop // 2] = bool(row.silence)
        elif row.band == 0 and row.hop % 2 == 0:
            det[row.hop // 2] = row.curve is Curve.SILENCE
    return det


def silence_detection_rate(trace, labels, skip: int = HANGOVER_FRAMES) -> float:
    """Fraction of scored NoiseOnly frames the enhancement treated as silence.

    NR traces use their per-hop ``silence`` flag (decoder-guided noise in guided
    mode, the energy detector in unguided mode); MDRP traces use the curve.
    """
    frames = scored_noise_frames(labels, skip)
    det = _frame_detections(trace)
    frames = [i for i in frames if i in det]
    if not frames:
        raise NoNoiseFrames("labels contain no scoreable NoiseOnly frame")
    return float(np.mean([det[i] for i in frames]))


def log_spectral_distance(reference, test, labels, floor_db: float = LSD_FLOOR_DB) -> float:
    """RMS log-spectral difference over hops of Music frames.

    Powers below ``floor_db`` (per bin, re full scale) are clamped to it, so bins
    the reference leaves empty do not dominate with arbitrary depths.
    """
    if len(reference) != len(test):
        raise ValueError("reference and test lengths differ")
    music = [i for i, lb in enumerate(labels) if lb is Label.MUSIC]
    if not music:
        raise NoMusicFrames("labels contain no Music frame")
    hops = np.array([h for i in music for h in (2 * i, 2 * i + 1)])
    eps = 10 ** (floor_db / 10)
    pr = np.abs(spectral.stft(reference)[hops]) ** 2
    pt = np.abs(spectral.stft(test)[hops]) ** 2
    d = 10 * np.log10(np.maximum(pr, eps)) - 10 * np.log10(np.maximum(pt, eps))
    return float(np.sqrt(np.mean(d**2)))


# ---------------------------------------------------------------------- compare


@dataclass
class ReportRow:
    noise_type: str
    suppression_unguided_db: float
    suppression_guided_db: float
    detection_unguided: float
    detection_guided: float

    @property
    def improvement_db(self) -> float:
        return self.suppression_guided_db - self.suppression_unguided_db


@dataclass
class Condition:
    noisy: np.ndarray
    decoded: np.ndarray
    unguided: np.ndarray
    guided: np.ndarray
    trace_unguided: list
    trace_guided: list
    first_sid_hop: int | None


@dataclass
class MetricsReport:
    rows: list[ReportRow] = field(default_factory=list)
    conditions: dict[str, Condition] = field(default_factory=dict)
    music_lsd_unguided: float | None = None
    music_lsd_guided: float | None = None

    @property
    def silence_detection_rate(self) -> float | None:
        if not self.rows:
            return None
        return float(np.mean([r.detection_guided for r in self.rows]))


REPORT_FIELDS = ("noise_type", "suppression_unguided_db", "suppression_guided_db",
                 "improvement_db", "detection_unguided", "detection_guided")


def first_sid_hop(states) -> int | None:
    for i, s in enumerate(states):
        if s.frame_type.value == "SID":
            return 2 * i
    return None


def run_condition(clean, labels, noise_type, snr_db, cfg=None, seed=0,
                  modules=("nr",)) -> Condition:
    noisy, _ = mix(clean, labels, noise_type, snr_db, seed=seed)
    link = transmit(noisy, dtx=True)
    ung = enhance(link.decoded, None, "unguided", modules, cfg)
    gui = enhance(link.decoded, link.states, "guided", modules, cfg)
    return Condition(noisy, link.decoded, ung.pcm, gui.pcm,
                     ung.traces.get("nr", []), gui.traces.get("nr", []),
                     first_sid_hop(link.states))


def compare(clean, labels, noise_types, snr_db: float, cfg: ControllerConfig | None = None,
            seed: int = 0) -> MetricsReport:
    """Unguided vs guided NR suppression and detection, one row per noise type."""
    report = MetricsReport()
    for name in noise_types:
        c = run_condition(clean, labels, name, snr_db, cfg, seed)
        report.conditions[name] = c
        report.rows.append(ReportRow(
            noise_type=name,
            suppression_unguided_db=suppression_db(c.decoded, c.unguided, labels),
            suppression_guided_db=suppression_db(c.decoded, c.guided, labels),
            detection_unguided=silence_detection_rate(c.trace_unguided, labels),
            detection_guided=silence_detection_rate(c.trace_guided, labels),
        ))
    return report


def music_lsd(clean, music_only, labels, snr_db: float, noise_type: str = "white",
              cfg: ControllerConfig | None = None, seed: int = 0) -> tuple[float, float, Condition]:
    """LSD of unguided and guided NR output against the clean music component."""
    c = run_condition(clean, labels, noise_type, snr_db, cfg, seed)
    return (log_spectral_distance(music_only, c.unguided, labels),
            log_spectral_distance(music_only, c.guided, labels), c)


def _fmt(v) -> str:
    return f"{v:.4f}" if isinstance(v, float) else str(v)


def write_report_csv(path, report: MetricsReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_FIELDS)
        for r in report.rows:
            w.writerow([_fmt(getattr(r, f)) for f in REPORT_FIELDS])


def write_nr_trace_csv(path, trace) -> None:
    from .noise_reduction import TRACE_FIELDS

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS)
        for t in trace:
            w.writerow([t.hop, f"{t.time_s:.3f}", t.provenance.value, t.policy.value,
                        _fmt(t.mean_gain_db), _fmt(t.mean_noise_db), _fmt(t.residual_db),
                        int(t.silence)])


def write_mdrp_trace_csv(path, trace) -> None:
    from .mdrp import TRACE_FIELDS

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS)
        for t in trace:
            w.writerow([t.hop, t.band, _fmt(t.level_db), _fmt(t.target_gain_db),
                        _fmt(t.applied_gain_db), t.curve.value])


def write_residual_csv(path, traces: dict[str, np.ndarray]) -> None:
    """Per-hop residual power columns for overlay plots (one column per pipeline)."""
    names = list(traces)
    n = max(len(v) for v in traces.values())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["hop", "time_s"] + [f"{k}_db" for k in names])
        for h in range(n):
            w.writerow([h, f"{h * spectral.HOP / 16000:.3f}"]
                       + [_fmt(float(traces[k][h])) if h < len(traces[k]) else "" for k in names])


__all__ = [
    "NoNoiseFrames", "NoMusicFrames", "NoiseSource", "MetricsReport", "ReportRow",
    "suppression_db", "residual_trace", "silence_detection_rate", "log_spectral_distance",
    "compare", "music_lsd", "scored_noise_frames",
]
