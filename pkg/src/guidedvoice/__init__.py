"""Decoder-guided downlink voice enhancement simulator.

Encoder/decoder stand-ins produce a DTX frame stream and per-frame decoder
states; the downlink noise reduction and dynamic range processor run either
unguided or steered by those states.
"""

from .controller import ControllerConfig, Curve, NoiseSource, NrPolicy, direct, load_config
from .decoder import DecoderState, decode
from .framestream import CodingMode, FrameCategory, Toc, load, save
from .noise_reduction import StateMisalignment
from .pipeline import enhance, transmit
from .uplink import EncoderConfig, encode

__version__ = "0.1.0"

__all__ = [
    "CodingMode", "ControllerConfig", "Curve", "DecoderState", "EncoderConfig",
    "FrameCategory", "NoiseSource", "NrPolicy", "StateMisalignment", "Toc",
    "decode", "direct", "encode", "enhance", "load", "load_config", "save", "transmit",
]
