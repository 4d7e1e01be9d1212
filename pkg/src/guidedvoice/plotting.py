"""Report figures rendered to image files (non-interactive Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import spectral  # noqa: E402

FS = 16000
STYLE = {
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
}
COLORS = {"input": "0.6", "decoded": "0.6", "unguided": "tab:red", "guided": "tab:blue"}


def _hop_times(n: int) -> np.ndarray:
    return np.arange(n) * spectral.HOP / FS


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def residual_overlay(path, traces: dict, first_sid_hop=None, title: str = "") -> None:
    """Per-hop output power of several pipelines on one time axis."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(8, 3))
        for name, values in traces.items():
            values = np.asarray(values)
            ax.plot(_hop_times(len(values)), values, lw=0.8, label=name,
                    color=COLORS.get(name))
        if first_sid_hop is not None:
            ax.axvline(first_sid_hop * spectral.HOP / FS, color="k", ls=":", lw=0.8,
                       label="first SID")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("power per hop [dBFS]")
        ax.set_title(title)
        ax.legend(loc="lower right", fontsize=8)
        _save(fig, path)


def suppression_bars(path, report) -> None:
    """Grouped bars of unguided vs guided suppression per noise type."""
    names = [r.noise_type for r in report.rows]
    x = np.arange(len(names))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4, 1.1 * len(names) + 2), 3))
        ax.bar(x - 0.2, [r.suppression_unguided_db for r in report.rows], 0.4,
               label="unguided", color=COLORS["unguided"])
        ax.bar(x + 0.2, [r.suppression_guided_db for r in report.rows], 0.4,
               label="guided", color=COLORS["guided"])
        ax.set_xticks(x, names)
        ax.set_ylabel("noise suppression [dB]")
        ax.legend(fontsize=8)
        _save(fig, path)


def mdrp_gains(path, traces: dict) -> None:
    """Applied MDRP gain per band over time, one panel per band."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(3, 1, figsize=(8, 5), sharex=True)
        for name, trace in traces.items():
            for band, ax in enumerate(axes):
                rows = [t for t in trace if t.band == band]
                ax.plot(_hop_times(len(rows)), [t.applied_gain_db for t in rows], lw=0.8,
                        label=name, color=COLORS.get(name))
                ax.set_ylabel(f"band {band} [dB]")
        axes[0].legend(fontsize=8)
        axes[-1].set_xlabel("time [s]")
        _save(fig, path)


def spectrograms(path, signals: dict, floor_db: float = -90.0) -> None:
    """Stacked log-power spectrograms on a shared colour scale."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(signals), 1, figsize=(8, 2.2 * len(signals)),
                                 sharex=True, squeeze=False)
        for ax, (name, x) in zip(axes[:, 0], signals.items()):
            p = 10 * np.log10(np.abs(spectral.stft(x)) ** 2 + spectral.EPS)
            ax.imshow(np.maximum(p.T, floor_db), origin="lower", aspect="auto",
                      extent=(0, p.shape[0] * spectral.HOP / FS, 0, FS / 2000),
                      vmin=floor_db, vmax=floor_db + 80, cmap="magma")
            ax.set_ylabel(f"{name}\nkHz")
            ax.grid(False)
        axes[-1, 0].set_xlabel("time [s]")
        _save(fig, path)
