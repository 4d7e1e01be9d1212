"""End-to-end chain: encoder -> decoder -> downlink enhancement (NR, then MDRP)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mdrp, noise_reduction
from .controller import ControllerConfig
from .decoder import DEFAULT_SEED, decode
from .uplink import EncoderConfig, encode, from_int16, to_int16

MODULES = ("nr", "mdrp")


@dataclass
class Link:
    header: object
    frames: list
    decoded: np.ndarray
    states: list


def transmit(samples, dtx: bool = True, seed: int = DEFAULT_SEED,
             enc_cfg: EncoderConfig | None = None) -> Link:
    header, frames = encode(samples, dtx=dtx, cfg=enc_cfg)
    pcm, states = decode(header, frames, seed=seed)
    return Link(header, frames, pcm, states)


@dataclass
class Enhanced:
    pcm: np.ndarray
    traces: dict = field(default_factory=dict)


def enhance(pcm, states=None, mode: str = "unguided", modules=MODULES,
            cfg: ControllerConfig | None = None, quantize: bool = True) -> Enhanced:
    """Run the selected downlink modules in chain order (NR before MDRP).

    With ``quantize`` the result is rounded to the 16-bit grid, the same as
    writing it to a WAV file.
    """
    unknown = set(modules) - set(MODULES)
    if unknown:
        raise ValueError(f"unknown modules: {', '.join(sorted(unknown))}")
    if mode == "guided" and states is None:
        raise noise_reduction.StateMisalignment("guided mode needs decoder states")
    states = states if mode == "guided" else None
    out = np.asarray(pcm, dtype=float)
    traces = {}
    if "nr" in modules:
        out, traces["nr"] = noise_reduction.process(out, states, mode, cfg)
    if "mdrp" in modules:
        out, traces["mdrp"] = mdrp.process(out, states, mode, cfg)
    if quantize:
        out = from_int16(to_int16(out))
    return Enhanced(out, traces)
