"""Single-channel noise reduction: minimum statistics + spectral subtraction.

Runs unguided (the conventional baseline, noise always from the internal
minimum-statistics tracker) or guided by decoder states (the noise estimate
multiplexer switches to the comfort-noise envelope on SID/NO_DATA frames and
music frames get a softer policy).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .controller import (
    ControllerConfig,
    EnhancementDirective,
    NoiseSource,
    NrPolicy,
    directives,
)
from .uplink import EncoderConfig, new_vad_state, vad_raw

HOPS_PER_FRAME = 2
FRAME_LEN = HOPS_PER_FRAME * spectral.HOP


class StateMisalignment(ValueError):
    pass


@dataclass
class NrConfig:
    alpha_smooth: float = 0.85
    bias: float = 1.5
    subwindows: int = 10
    subwindow_len: int = 10
    beta_aggressive: float = 1.5
    floor_aggressive_db: float = -18.0
    beta_soft: float = 0.5
    floor_soft_db: float = -6.0

    @classmethod
    def from_controller(cls, cfg: ControllerConfig) -> "NrConfig":
        return cls(cfg.alpha_smooth, cfg.bias, cfg.subwindows, cfg.subwindow_len,
                   cfg.beta_aggressive, cfg.floor_aggressive_db,
                   cfg.beta_soft, cfg.floor_soft_db)

    def policy_params(self, policy: NrPolicy) -> tuple[float, float]:
        if policy is NrPolicy.SOFT:
            return self.beta_soft, 10 ** (self.floor_soft_db / 20)
        return self.beta_aggressive, 10 ** (self.floor_aggressive_db / 20)


class NoiseEstimate:
    """Minimum-statistics noise PSD tracker.

    The smoothed periodogram's minimum is kept per sub-window; the estimate is
    ``bias`` times the minimum over the ring of sub-window minima.
    """

    def __init__(self, cfg: NrConfig | None = None, n_bins: int = spectral.N_BINS):
        self.cfg = cfg or NrConfig()
        self.smoothed_periodogram = np.zeros(n_bins)
        self.min_tracker = np.full((self.cfg.subwindows, n_bins), np.inf)
        self.psd = np.zeros(n_bins)
        self.provenance = NoiseSource.INTERNAL
        self.hops = 0
        self._slot = 0

    def smooth(self, power) -> None:
        a = self.cfg.alpha_smooth
        if self.hops == 0:
            self.smoothed_periodogram = np.array(power, dtype=float)
        else:
            self.smoothed_periodogram = a * self.smoothed_periodogram + (1 - a) * power

    def track(self) -> None:
        if self.hops and self.hops % self.cfg.subwindow_len == 0:
            self._slot = (self._slot + 1) % self.cfg.subwindows
            self.min_tracker[self._slot] = np.inf
        np.minimum(self.min_tracker[self._slot], self.smoothed_periodogram,
                   out=self.min_tracker[self._slot])
        self.psd = self.cfg.bias * self.min_tracker.min(axis=0)
        self.provenance = NoiseSource.INTERNAL

    def reseed(self, psd) -> None:
        """Overwrite the tracker so the internal estimate equals ``psd``."""
        self.min_tracker[:] = np.asarray(psd) / self.cfg.bias
        self.psd = np.array(psd, dtype=float)

    def update(self, power) -> "NoiseEstimate":
        self.smooth(power)
        self.track()
        self.hops += 1
        return self


def update_noise(power, est: NoiseEstimate) -> NoiseEstimate:
    return est.update(np.asarray(power, dtype=float))


def compute_gain(power, noise_psd, policy: NrPolicy, cfg: NrConfig | None = None) -> np.ndarray:
    """Power spectral subtraction gain with a magnitude floor.

    ``G = max(sqrt(max(0, 1 - beta * psd / power)), floor)``; Bypass gives 1.
    """
    power = np.asarray(power, dtype=float)
    if policy is NrPolicy.BYPASS:
        return np.ones_like(power)
    beta, floor = (cfg or NrConfig()).policy_params(policy)
    ratio = beta * np.asarray(noise_psd) / np.maximum(power, 1e-12)
    return np.maximum(np.sqrt(np.maximum(0.0, 1.0 - ratio)), floor)


@dataclass
class NrTraceRow:
    hop: int
    provenance: NoiseSource
    policy: NrPolicy
    mean_gain_db: float
    mean_noise_db: float
    silence: bool
    residual_db: float = float("nan")

    @property
    def time_s(self) -> float:
        return self.hop * spectral.HOP / 16000


TRACE_FIELDS = ("hop", "time_s", "provenance", "policy", "mean_gain_db",
                "mean_noise_db", "residual_db", "silence")


def hop_residual_db(pcm, n_hops: int) -> np.ndarray:
    x = np.zeros(n_hops * spectral.HOP)
    x[: min(len(pcm), len(x))] = pcm[: len(x)]
    return 10 * np.log10(np.mean(x.reshape(n_hops, spectral.HOP) ** 2, axis=1) + 1e-12)


def check_alignment(n_samples: int, states) -> int:
    hops = spectral.n_hops(n_samples)
    if states is None or len(states) * HOPS_PER_FRAME != hops:
        n = "no" if states is None else len(states)
        raise StateMisalignment(
            f"{n} decoder states for {hops} hops ({HOPS_PER_FRAME} hops per frame expected)"
        )
    return hops


def energy_silence_flags(pcm, cfg: EncoderConfig | None = None) -> np.ndarray:
    """Per-frame energy detector used by the unguided path.

    A frame is silent when it fails the VAD's raw energy test against the
    running noise floor, without hangover.
    """
    cfg = cfg or EncoderConfig()
    state = new_vad_state(cfg)
    n = len(pcm) // FRAME_LEN
    flags = np.zeros(n, dtype=bool)
    for i in range(n):
        frame = pcm[i * FRAME_LEN : (i + 1) * FRAME_LEN]
        e = 10 * np.log10(np.mean(frame**2) + 1e-12)
        state.history.append(e)
        flags[i] = not vad_raw(e, state.noise_floor_db, cfg)
    return flags


class NoiseReducer:
    """Stateful per-stream processor.

    ``process`` with ``states=None`` runs the unguided baseline; it never
    touches decoder information. After a run, ``gains`` holds the applied
    per-hop, per-bin gain matrix.
    """

    def __init__(self, cfg: ControllerConfig | None = None):
        self.ctl = cfg or ControllerConfig()
        self.cfg = NrConfig.from_controller(self.ctl)
        self.gains = np.zeros((0, spectral.N_BINS))

    def process(self, pcm, states=None, mode: str = "unguided"):
        pcm = np.asarray(pcm, dtype=float)
        if mode not in ("guided", "unguided"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "guided":
            hops = check_alignment(len(pcm), states)
            plan = directives(states, self.ctl)
        else:
            hops = spectral.n_hops(len(pcm))
            plan = None
            silent_frames = energy_silence_flags(pcm)

        spec = spectral.stft(pcm)
        est = NoiseEstimate(self.cfg)
        trace = []
        self.gains = np.empty((hops, spectral.N_BINS))
        fade_from: EnhancementDirective | None = None
        fade_len = fade_pos = 0
        current: EnhancementDirective | None = None

        for h in range(hops):
            power = spec[h].real**2 + spec[h].imag**2
            if plan is None:
                d = _UNGUIDED
            else:
                d = plan[h // HOPS_PER_FRAME]
                if h % HOPS_PER_FRAME == 0 and d.crossfade_hops and current is not None:
                    fade_from, fade_len, fade_pos = current, d.crossfade_hops, 0
                current = d

            if d.freeze_nr_estimation and d.noise_source is NoiseSource.DECODER_GUIDED:
                est.smooth(power)
                est.hops += 1
                est.reseed(d.guided_noise_psd)
            else:
                est.update(power)

            gains = self._gains(d, est)
            if fade_from is not None:
                # ramp only where attenuation grows; onsets release at once
                t = (fade_pos + 1) / fade_len
                gains = np.maximum((1 - t) * self._gains(fade_from, est) + t * gains, gains)
                fade_pos += 1
                if fade_pos >= fade_len:
                    fade_from = None
            spec[h] *= gains
            self.gains[h] = gains

            noise = d.guided_noise_psd if d.noise_source is NoiseSource.DECODER_GUIDED else est.psd
            if plan is None:
                silent = bool(silent_frames[h // HOPS_PER_FRAME]) if h // HOPS_PER_FRAME < len(silent_frames) else False
            else:
                silent = d.noise_source is NoiseSource.DECODER_GUIDED
            trace.append(NrTraceRow(
                hop=h,
                provenance=d.noise_source,
                policy=d.nr_policy,
                mean_gain_db=float(20 * np.log10(np.mean(gains))),
                mean_noise_db=float(10 * np.log10(np.mean(noise) + 1e-12)),
                silence=silent,
            ))

        out = spectral.istft(spec, len(pcm))
        for row, r in zip(trace, hop_residual_db(out, hops)):
            row.residual_db = float(r)
        return out, trace

    def _gains(self, d: EnhancementDirective, est: NoiseEstimate) -> np.ndarray:
        if d.noise_source is NoiseSource.DECODER_GUIDED:
            # the frame carries no voice, so the noisy-signal spectrum is the
            # decoder's noise model itself
            return compute_gain(d.guided_noise_psd, d.guided_noise_psd, d.nr_policy, self.cfg)
        return compute_gain(est.smoothed_periodogram, est.psd, d.nr_policy, self.cfg)


_UNGUIDED = EnhancementDirective(NrPolicy.AGGRESSIVE, NoiseSource.INTERNAL, None)


def process(pcm, states=None, mode: str = "unguided", cfg: ControllerConfig | None = None):
    """Run noise reduction over a whole signal; returns ``(pcm_out, trace)``."""
    return NoiseReducer(cfg).process(pcm, states, mode)
