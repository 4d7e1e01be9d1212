"""Multiband dynamic range processor.

Three FFT-bin bands, each with a piecewise-linear gain-vs-level curve and
asymmetric one-pole gain smoothing in dB. In guided mode the controller swaps
the speech curve for the silence curve on SID/NO_DATA frames so background
noise is not expanded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .controller import ControllerConfig, Curve, EnhancementDirective, NoiseSource, NrPolicy, directives
from .noise_reduction import HOPS_PER_FRAME, check_alignment

BANDS = ((1, 33), (33, 129), (129, 257))  # half-open bin ranges; bin 0 passes at unity


def curve_gain(level_db, points) -> float:
    """Linear interpolation between knots, flat beyond the end knots."""
    levels = [p[0] for p in points]
    gains = [p[1] for p in points]
    return float(np.interp(level_db, levels, gains))


def band_levels_db(power) -> np.ndarray:
    return np.array([10 * np.log10(np.mean(power[lo:hi]) + 1e-12) for lo, hi in BANDS])


@dataclass
class MdrpTraceRow:
    hop: int
    band: int
    level_db: float
    target_gain_db: float
    applied_gain_db: float
    curve: Curve


TRACE_FIELDS = ("hop", "band", "level_db", "target_gain_db", "applied_gain_db", "curve")

_UNGUIDED = EnhancementDirective(NrPolicy.AGGRESSIVE, NoiseSource.INTERNAL, Curve.SPEECH)


class DynamicRangeProcessor:
    def __init__(self, cfg: ControllerConfig | None = None):
        self.cfg = cfg or ControllerConfig()

    def _targets(self, levels, curve: Curve) -> np.ndarray:
        curves = self.cfg.speech_curves if curve is Curve.SPEECH else self.cfg.silence_curves
        return np.array([curve_gain(lv, c) for lv, c in zip(levels, curves)])

    def process(self, pcm, states=None, mode: str = "unguided"):
        pcm = np.asarray(pcm, dtype=float)
        if mode not in ("guided", "unguided"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "guided":
            hops = check_alignment(len(pcm), states)
            plan = directives(states, self.cfg)
        else:
            hops = spectral.n_hops(len(pcm))
            plan = None

        spec = spectral.stft(pcm)
        # one smoothed gain per curve and band; a curve switch crossfades
        # between the two smoothed paths
        smoothed: dict[Curve, np.ndarray] = {}
        current = fade_from = None
        fade_len = fade_pos = 0
        trace = []

        for h in range(hops):
            power = spec[h].real**2 + spec[h].imag**2
            levels = band_levels_db(power)
            if plan is None:
                d = _UNGUIDED
            else:
                d = plan[h // HOPS_PER_FRAME]
                if h % HOPS_PER_FRAME == 0 and d.crossfade_hops and current is not None:
                    fade_from, fade_len, fade_pos = current, d.crossfade_hops, 0
                current = d

            targets = {}
            for curve in (Curve.SPEECH, Curve.SILENCE) if plan is not None else (Curve.SPEECH,):
                targets[curve] = self._targets(levels, curve)
                g = smoothed.get(curve)
                if g is None:
                    smoothed[curve] = targets[curve].copy()
                else:
                    alpha = np.where(targets[curve] < g, self.cfg.attack_alpha, self.cfg.release_alpha)
                    smoothed[curve] = alpha * g + (1 - alpha) * targets[curve]

            target = targets[d.mdrp_curve]
            applied = smoothed[d.mdrp_curve]
            if fade_from is not None:
                t = (fade_pos + 1) / fade_len
                target = (1 - t) * targets[fade_from.mdrp_curve] + t * target
                applied = (1 - t) * smoothed[fade_from.mdrp_curve] + t * applied
                fade_pos += 1
                if fade_pos >= fade_len:
                    fade_from = None

            lin = 10 ** (applied / 20)
            for b, (lo, hi) in enumerate(BANDS):
                spec[h, lo:hi] *= lin[b]
                trace.append(MdrpTraceRow(h, b, float(levels[b]), float(target[b]),
                                          float(applied[b]), d.mdrp_curve))

        return spectral.istft(spec, len(pcm)), trace


def process(pcm, states=None, mode: str = "unguided", cfg: ControllerConfig | None = None):
    return DynamicRangeProcessor(cfg).process(pcm, states, mode)
