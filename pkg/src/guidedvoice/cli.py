"""Command-line entry point: gen, encode, decode, enhance, compare."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import framestream, metrics, signals
from .controller import ControllerConfig, load_config
from .decoder import DEFAULT_SEED, decode, read_states_csv, write_states_csv
from .noise_reduction import StateMisalignment
from .pipeline import MODULES, enhance, transmit
from .uplink import encode, from_int16, to_int16
from .wavio import WavFormatError, read_wav, write_wav

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_FORMAT = 4
EXIT_MISALIGNED = 5

EPILOG = """\
exit codes:
  0  success
  1  other processing error
  2  usage error (bad flags, guided mode without a state source)
  3  input file not found
  4  malformed input (WAV, .gvf stream, CSV or controller config)
  5  decoder states do not line up with the audio (2 hops per 20 ms frame)
"""

CLI_SEED = 0


class UsageError(Exception):
    pass


def _quantized(x) -> np.ndarray:
    return from_int16(to_int16(x))


def _config(path) -> ControllerConfig:
    return load_config(path) if path else ControllerConfig()


def _modules(text: str) -> tuple[str, ...]:
    mods = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in mods if m not in MODULES]
    if not mods or bad:
        raise UsageError(f"--modules takes a comma list from {','.join(MODULES)}")
    return tuple(m for m in MODULES if m in mods)


def _noise_list(text: str) -> list[str]:
    names = [n.strip() for n in text.split(",") if n.strip()]
    bad = [n for n in names if n not in signals.NOISE_BANK]
    if bad:
        raise UsageError(f"unknown noise type(s) {','.join(bad)}; "
                         f"choose from {','.join(signals.NOISE_BANK)}")
    return names


# ------------------------------------------------------------------ subcommands


def cmd_gen(args) -> None:
    x, labels = signals.generate(args.kind, args.duration, seed=args.seed)
    x = _quantized(x)
    if args.noise:
        if args.noise not in signals.NOISE_BANK:
            raise UsageError(f"unknown noise type {args.noise}")
        x, _ = signals.mix(x, labels, args.noise, args.snr, seed=args.seed,
                           noise_level_db=args.noise_level)
    write_wav(args.output, x)
    if args.labels:
        signals.write_labels(args.labels, labels)


def cmd_encode(args) -> None:
    header, frames = encode(read_wav(args.input), dtx=not args.no_dtx)
    framestream.save(args.output, header, frames)


def cmd_decode(args) -> None:
    header, frames = framestream.load(args.input)
    pcm, states = decode(header, frames, seed=args.cng_seed)
    write_wav(args.output, pcm)
    if args.states:
        write_states_csv(args.states, states)


def cmd_enhance(args) -> None:
    pcm = read_wav(args.input)
    states = None
    if args.mode == "guided":
        if args.states and args.stream:
            raise UsageError("give either --states or --stream, not both")
        if args.states:
            states = read_states_csv(args.states)
        elif args.stream:
            header, frames = framestream.load(args.stream)
            states = decode(header, frames, seed=args.cng_seed)[1]
        else:
            raise UsageError("--mode guided needs --states CSV or --stream .gvf")
    out = enhance(pcm, states, args.mode, _modules(args.modules), _config(args.config))
    write_wav(args.output, out.pcm)
    if args.trace:
        prefix = Path(args.trace)
        if "nr" in out.traces:
            metrics.write_nr_trace_csv(f"{prefix}_nr.csv", out.traces["nr"])
        if "mdrp" in out.traces:
            metrics.write_mdrp_trace_csv(f"{prefix}_mdrp.csv", out.traces["mdrp"])


def _music_reference(clean, labels) -> np.ndarray:
    mask = np.repeat([lb is signals.Label.MUSIC for lb in labels], signals.FRAME)
    ref = np.zeros_like(clean)
    ref[: len(mask)] = np.where(mask, clean[: len(mask)], 0.0)
    return ref


def cmd_compare(args) -> None:
    if args.clean:
        if not args.labels:
            raise UsageError("--clean needs --labels")
        clean = read_wav(args.clean)
        labels = signals.read_labels(args.labels)
    else:
        x, labels = signals.generate(args.kind, args.duration, seed=args.seed)
        clean = _quantized(x)
    cfg = _config(args.config)
    noises = _noise_list(args.noises)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    report = metrics.compare(clean, labels, noises, args.snr, cfg, seed=args.seed)
    if any(lb is signals.Label.MUSIC for lb in labels) and noises:
        c = report.conditions[noises[0]]
        ref = _music_reference(clean, labels)
        report.music_lsd_unguided = metrics.log_spectral_distance(ref, c.unguided, labels)
        report.music_lsd_guided = metrics.log_spectral_distance(ref, c.guided, labels)

    metrics.write_report_csv(out / "report.csv", report)
    _write_summary(out / "summary.csv", report)
    for name, c in report.conditions.items():
        metrics.write_nr_trace_csv(out / f"nr_trace_unguided_{name}.csv", c.trace_unguided)
        metrics.write_nr_trace_csv(out / f"nr_trace_guided_{name}.csv", c.trace_guided)
        residual = {
            "decoded": metrics.residual_trace(c.decoded),
            "unguided": metrics.residual_trace(c.unguided),
            "guided": metrics.residual_trace(c.guided),
        }
        metrics.write_residual_csv(out / f"residual_{name}.csv", residual)
        if args.wavs:
            for tag in ("noisy", "decoded", "unguided", "guided"):
                write_wav(out / f"{tag}_{name}.wav", getattr(c, tag))
        if not args.no_figures:
            from . import plotting

            plotting.residual_overlay(out / f"residual_{name}.png", residual,
                                      c.first_sid_hop, title=f"{name}, {args.snr:g} dB SNR")
            plotting.spectrograms(out / f"spectrogram_{name}.png",
                                  {"decoded": c.decoded, "unguided": c.unguided,
                                   "guided": c.guided})
    if report.rows and not args.no_figures:
        from . import plotting

        plotting.suppression_bars(out / "suppression.png", report)
    if not args.quiet:
        for r in report.rows:
            print(f"{r.noise_type:>10}  unguided {r.suppression_unguided_db:6.2f} dB  "
                  f"guided {r.suppression_guided_db:6.2f} dB  (+{r.improvement_db:.2f})")


def _write_summary(path, report) -> None:
    def fmt(v):
        return "" if v is None else f"{v:.4f}"

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["silence_detection_rate", "music_lsd_unguided_db", "music_lsd_guided_db"])
        w.writerow([fmt(report.silence_detection_rate), fmt(report.music_lsd_unguided),
                    fmt(report.music_lsd_guided)])


# ---------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="guidedvoice",
        description="Decoder-guided downlink voice enhancement simulator.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        return sub.add_parser(name, help=help_text, description=help_text, epilog=EPILOG,
                              formatter_class=argparse.RawDescriptionHelpFormatter)

    g = add("gen", "generate a synthetic test vector and its frame labels")
    g.add_argument("kind", choices=signals.KINDS)
    g.add_argument("output", help="WAV path")
    g.add_argument("--duration", type=float, default=10.0, help="seconds (default 10)")
    g.add_argument("--seed", type=int, default=CLI_SEED)
    g.add_argument("--labels", help="write frame labels CSV (frame_index,label)")
    g.add_argument("--noise", help="mix a noise type from the bank into the vector")
    g.add_argument("--snr", type=float, default=10.0, help="SNR in dB for --noise")
    g.add_argument("--noise-level", type=float, help="absolute noise level in dBFS instead of --snr")
    g.set_defaults(func=cmd_gen)

    e = add("encode", "encode a WAV into a .gvf frame stream")
    e.add_argument("input")
    e.add_argument("output")
    e.add_argument("--no-dtx", action="store_true", help="send every frame as SPEECH")
    e.set_defaults(func=cmd_encode)

    d = add("decode", "decode a .gvf stream to WAV and, optionally, per-frame states")
    d.add_argument("input")
    d.add_argument("output")
    d.add_argument("--states", help="write decoder states CSV")
    d.add_argument("--cng-seed", type=int, default=DEFAULT_SEED)
    d.set_defaults(func=cmd_decode)

    n = add("enhance", "run downlink noise reduction and/or MDRP on a WAV")
    n.add_argument("input")
    n.add_argument("output")
    n.add_argument("--mode", choices=("guided", "unguided"), default="unguided")
    n.add_argument("--states", help="decoder states CSV (guided mode)")
    n.add_argument("--stream", help=".gvf stream to decode for states (guided mode)")
    n.add_argument("--cng-seed", type=int, default=DEFAULT_SEED)
    n.add_argument("--modules", default="nr,mdrp", help="comma list of nr,mdrp (default both)")
    n.add_argument("--config", help="controller config file (key = value lines)")
    n.add_argument("--trace", help="write traces to PREFIX_nr.csv / PREFIX_mdrp.csv")
    n.set_defaults(func=cmd_enhance)

    c = add("compare", "unguided vs guided NR per noise type; CSV report plus figures")
    c.add_argument("--clean", help="clean WAV (default: generate --kind)")
    c.add_argument("--labels", help="labels CSV for --clean")
    c.add_argument("--kind", choices=signals.KINDS, default="speech_like")
    c.add_argument("--duration", type=float, default=12.0)
    c.add_argument("--noises", default="white", help="comma list of noise types")
    c.add_argument("--snr", type=float, default=10.0)
    c.add_argument("--seed", type=int, default=CLI_SEED)
    c.add_argument("--config")
    c.add_argument("--out-dir", default="report")
    c.add_argument("--wavs", action="store_true", help="also write per-condition WAVs")
    c.add_argument("--no-figures", action="store_true")
    c.add_argument("--quiet", action="store_true")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"guidedvoice: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"guidedvoice: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except StateMisalignment as exc:
        print(f"guidedvoice: state misalignment: {exc}", file=sys.stderr)
        return EXIT_MISALIGNED
    except (framestream.FrameStreamError, WavFormatError, ValueError, KeyError) as exc:
        print(f"guidedvoice: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except Exception as exc:  # noqa: BLE001 - one-line diagnostic for anything else
        print(f"guidedvoice: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
