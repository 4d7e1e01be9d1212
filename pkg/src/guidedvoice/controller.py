"""Model-based downlink processing controller.

Turns each frame's :class:`~guidedvoice.decoder.DecoderState` into an
:class:`EnhancementDirective`: a signal classifier gate (voice/music), a frame
type detector, the noise estimate multiplexer and transition smoothing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from enum import Enum

import numpy as np

from . import framestream as fs
from . import spectral


class NrPolicy(Enum):
    AGGRESSIVE = "Aggressive"
    SOFT = "Soft"
    BYPASS = "Bypass"


class NoiseSource(Enum):
    INTERNAL = "Internal"
    DECODER_GUIDED = "DecoderGuided"


class Curve(Enum):
    SPEECH = "SpeechCurve"
    SILENCE = "SilenceCurve"


DEFAULT_SPEECH_CURVE = ((-80.0, 9.0), (-50.0, 9.0), (-20.0, 0.0), (0.0, -10.0))
DEFAULT_SILENCE_CURVE = ((-80.0, 0.0), (0.0, 0.0))
N_MDRP_BANDS = 3


@dataclass
class ControllerConfig:
    """Everything the controller file can set.

    NR and MDRP parameters ride along here so one file configures a run.
    """

    music_policy: NrPolicy = NrPolicy.SOFT
    freeze_variant: bool = False
    crossfade_hops: int = 4
    # noise reduction
    alpha_smooth: float = 0.85
    bias: float = 1.5
    subwindows: int = 10
    subwindow_len: int = 10
    beta_aggressive: float = 1.5
    floor_aggressive_db: float = -18.0
    beta_soft: float = 0.5
    floor_soft_db: float = -6.0
    # MDRP
    attack_alpha: float = 0.5
    release_alpha: float = 0.9
    speech_curves: tuple = (DEFAULT_SPEECH_CURVE,) * N_MDRP_BANDS
    silence_curves: tuple = (DEFAULT_SILENCE_CURVE,) * N_MDRP_BANDS

    def __post_init__(self):
        if not 0 < self.alpha_smooth < 1:
            raise ValueError("alpha_smooth must lie in (0, 1)")
        if self.bias < 1:
            raise ValueError("bias must be >= 1")
        if self.floor_aggressive_db >= 0 or self.floor_soft_db >= 0:
            raise ValueError("gain floors must be negative dB")
        if self.crossfade_hops < 0:
            raise ValueError("crossfade_hops must be >= 0")
        for name in ("attack_alpha", "release_alpha"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in [0, 1)")
        for curves in (self.speech_curves, self.silence_curves):
            if len(curves) != N_MDRP_BANDS:
                raise ValueError(f"need one curve per MDRP band ({N_MDRP_BANDS})")
            for pts in curves:
                levels = [p[0] for p in pts]
                if len(pts) < 1 or any(b <= a for a, b in zip(levels, levels[1:])):
                    raise ValueError(f"curve knots must have increasing levels: {pts}")


@dataclass
class EnhancementDirective:
    nr_policy: NrPolicy
    noise_source: NoiseSource
    mdrp_curve: Curve
    guided_noise_psd: np.ndarray | None = field(default=None, repr=False)
    freeze_nr_estimation: bool = False
    crossfade_hops: int = 0


def direct(state, cfg: ControllerConfig | None = None,
           previous: EnhancementDirective | None = None) -> EnhancementDirective:
    cfg = cfg or ControllerConfig()
    if state.coding_mode is fs.CodingMode.MUSIC:
        d = EnhancementDirective(cfg.music_policy, NoiseSource.INTERNAL, Curve.SPEECH)
    elif state.frame_type.inactive:
        d = EnhancementDirective(
            NrPolicy.AGGRESSIVE,
            NoiseSource.DECODER_GUIDED,
            Curve.SILENCE,
            guided_noise_psd=spectral.expand_envelope(state.cng_envelope),
            freeze_nr_estimation=cfg.freeze_variant,
        )
    else:
        # SPEECH_LOST is concealed audio; treat it as active speech
        d = EnhancementDirective(NrPolicy.AGGRESSIVE, NoiseSource.INTERNAL, Curve.SPEECH)
    if previous is not None and (
        previous.nr_policy is not d.nr_policy or previous.mdrp_curve is not d.mdrp_curve
    ):
        d.crossfade_hops = cfg.crossfade_hops
    return d


def directives(states, cfg: ControllerConfig | None = None) -> list[EnhancementDirective]:
    out, prev = [], None
    for s in states:
        prev = direct(s, cfg, prev)
        out.append(prev)
    return out


# ----------------------------------------------------------------- config file

_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}
_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def parse_curve(text: str) -> tuple:
    """``(-80,9),(-50,9),(-20,0),(0,-10)`` -> knot tuple; parentheses optional."""
    nums = [float(v) for v in _NUMBER.findall(text)]
    if not nums or len(nums) % 2:
        raise ValueError(f"curve needs (level,gain) pairs: {text!r}")
    return tuple(zip(nums[0::2], nums[1::2]))


def parse_config(text: str) -> ControllerConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Curve keys: ``speech_curve`` / ``silence_curve`` set all three bands,
    ``speech_curve.0`` .. ``speech_curve.2`` set one band.
    """
    kwargs: dict = {}
    speech = list(ControllerConfig.speech_curves)
    silence = list(ControllerConfig.silence_curves)
    types = {f.name: f.type for f in fields(ControllerConfig)}

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        base, _, band = key.partition(".")
        if base in ("speech_curve", "silence_curve"):
            target = speech if base == "speech_curve" else silence
            curve = parse_curve(value)
            if band:
                target[int(band)] = curve
            else:
                target[:] = [curve] * N_MDRP_BANDS
        elif key == "music_policy":
            kwargs[key] = NrPolicy(value.capitalize())
        elif key == "freeze_variant":
            if value.lower() not in _BOOL:
                raise ValueError(f"line {lineno}: bad boolean {value!r}")
            kwargs[key] = _BOOL[value.lower()]
        elif key in types:
            kwargs[key] = int(value) if types[key] == "int" else float(value)
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    return ControllerConfig(speech_curves=tuple(speech), silence_curves=tuple(silence), **kwargs)


def load_config(path) -> ControllerConfig:
    with open(path) as fh:
        return parse_config(fh.read())
