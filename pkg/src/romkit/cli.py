"""
romkit command line.

Data goes to stdout (or --out), diagnostics to stderr. Exit codes:
0 ok, 2 usage, 3 parse, 4 validation, 5 degenerate geometry.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_CHANNEL,
    DEFAULT_PROMINENCE,
    DEFAULT_SAMPLES,
    DEFAULT_SMOOTH_WINDOW,
    angle_series,
    compare_profiles,
    cycle_profiles,
    rom_summary,
    segment_cycles,
    smooth,
)
from .dataset import (
    FORMAT_MAGIC,
    LABELS,
    PROFILE_COLUMNS,
    format_angles,
    format_cycles,
    format_profile,
    format_report,
    format_rom,
    format_sequence,
    format_summaries,
    load_manifest,
    parse_angles,
    parse_landmarks,
    parse_profiles,
    read_sequence,
)
from .errors import DegenerateGeometryError, ManifestError, ParseError, RomkitError, UsageError, ValidationError
from .geometry import CHANNELS, abduction_channel, finger_channels
from .skeleton import Finger, validate
from .synth import SynthParams, generate_synthetic

DEFAULT_FINGER = "IV"


def _workers() -> int:
    env = os.environ.get("ROMKIT_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"ROMKIT_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return min(4, os.cpu_count() or 1)


def _ordered_map(fn, items):
    items = list(items)
    n = _workers()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _emit(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _warn(msg):
    print(f"romkit: {msg}", file=sys.stderr)


def _first_line(path) -> str:
    with open(path, "rb") as fh:
        for raw in fh:
            if raw.strip():
                return raw.decode("utf-8", "replace").strip()
    return ""


def _is_sequence(path) -> bool:
    return _first_line(path).startswith(f"# {FORMAT_MAGIC}")


def _load_sequence(path, strict=False):
    seq = read_sequence(path)
    report = validate(seq)
    for f in report:
        _warn(f"{path}: {f}")
    if strict and not report.ok:
        raise ValidationError(f"{path}: {len(report)} validation finding(s)")
    return seq


def _load_series(path, strict=False):
    """Angle series from a skeleton sequence or from an angle table."""
    if not _is_sequence(path) and _first_line(path).startswith("frame,"):
        return parse_angles(path, sequence_id=Path(path).stem)
    return angle_series(_load_sequence(path, strict))


def _fit_window(window, n):
    # short recordings get the widest odd window that fits
    if window > n:
        window = n if n % 2 else n - 1
    return max(window, 1)


def _channel_arg(channel, finger):
    if channel:
        return channel
    if finger:
        return f"flex_{Finger.parse(finger).name}_PIP"
    return DEFAULT_CHANNEL


# -- commands -----------------------------------------------------------------------

def cmd_angles(args):
    series = _load_series(args.input, args.strict)
    if args.smooth_window != 1:
        series = smooth(series, args.smooth_window)
    if args.finger:
        series = series.select(finger_channels(args.finger))
    if args.strict and np.isnan(series.values).any():
        frames = np.flatnonzero(np.isnan(series.values).any(axis=1))
        raise DegenerateGeometryError(
            f"{len(frames)} frame(s) with unmeasurable angles, first at frame {frames[0]}"
        )
    _emit(format_angles(series), args.out)


def cmd_segment(args):
    series = _load_series(args.input)
    if args.smooth_window != 1:
        series = smooth(series, _fit_window(args.smooth_window, len(series)))
    landmarks = parse_landmarks(args.landmarks) if args.landmarks else None
    channel = _channel_arg(args.channel, args.finger)
    if not np.isfinite(series.channel(channel)).any():
        raise DegenerateGeometryError(f"channel {channel} has no measurable frames")
    cycles = segment_cycles(series, channel, args.prominence, landmarks)
    _emit(format_cycles(cycles, series.sequence_id), args.out)


def cmd_rom(args):
    series = _load_series(args.input)
    window = _fit_window(args.smooth_window, len(series)) if args.smooth_window != 1 else None
    _emit(format_rom(rom_summary(series, window)), args.out)


def _default_channel(movement, channel):
    if channel:
        return channel
    return abduction_channel(DEFAULT_FINGER) if movement == "abduction" else DEFAULT_CHANNEL


def _group_profiles(manifest, label, args):
    entries = manifest.select(label, args.movement)
    if not entries:
        return None

    def prepare(entry):
        path = manifest.resolve(entry.path)
        series = angle_series(_load_sequence(path))
        if args.smooth_window != 1:
            series = smooth(series, _fit_window(args.smooth_window, len(series)))
        marks = parse_landmarks(manifest.resolve(entry.landmarks)) if entry.landmarks else None
        return series, marks

    prepared = _ordered_map(prepare, entries)
    channel = _default_channel(args.movement, args.channel)
    return cycle_profiles(
        [p[0] for p in prepared],
        channel,
        args.prominence,
        args.samples,
        [p[1] for p in prepared],
    )


def cmd_aggregate(args):
    manifest = load_manifest(args.manifest)
    profiles = _group_profiles(manifest, args.group, args)
    if profiles is None:
        raise ValidationError(f"no {args.movement} sequences in group {args.group!r}")
    _emit(format_profile({args.group: list(profiles.values())}), args.out)


def _collect_profiles(inputs, args):
    """label -> channel -> profile, from manifests and/or profile tables."""
    merged: dict[str, dict] = {}
    for path in inputs:
        if _first_line(path) == ",".join(PROFILE_COLUMNS):
            found = parse_profiles(path)
        else:
            manifest = load_manifest(path)
            found = {}
            for label in LABELS:
                prof = _group_profiles(manifest, label, args)
                if prof is not None:
                    found[label] = prof
        for label, chans in found.items():
            if label in merged:
                raise ValidationError(f"group {label!r} supplied more than once")
            merged[label] = chans
    if not merged:
        raise ValidationError("no profiles to compare")
    order = [l for l in LABELS if l in merged] + sorted(l for l in merged if l not in LABELS)
    return {l: merged[l] for l in order}


def cmd_compare(args):
    groups = _collect_profiles(args.inputs, args)
    channels = [args.channel] if args.channel else [
        c for c in CHANNELS if any(c in g for g in groups.values())
    ] + sorted({c for g in groups.values() for c in g} - set(CHANNELS))
    comparisons = []
    for ch in channels:
        present = {label: g[ch] for label, g in groups.items() if ch in g}
        if present:
            comparisons.append(compare_profiles(present))
    if not comparisons:
        raise ValidationError(f"no group has a profile for channel {args.channel!r}")
    if args.summary:
        text = format_summaries(s for c in comparisons for s in c.summary())
    else:
        body = [format_profile({label: [p]}).split("\n", 1)[1]
                for c in comparisons for label, p in c.profiles.items()]
        text = ",".join(PROFILE_COLUMNS) + "\n" + "".join(body)
    _emit(text, args.out)


def cmd_synth(args):
    params = SynthParams(
        n_cycles=args.cycles,
        frames_per_cycle=args.frames_per_cycle,
        flexion_offset=tuple(args.flexion_offset),
        flexion_amplitude=tuple(args.flexion_amplitude),
        abduction_amplitude=args.abduction_amplitude,
        noise_sigma=args.noise,
        seed=args.seed,
        frame_rate=args.frame_rate,
        handedness=args.handedness,
    )
    _emit(format_sequence(generate_synthetic(params)), args.out)


def cmd_validate(args):
    path = args.input
    if _is_sequence(path) or Path(path).suffix.lower() not in (".yaml", ".yml"):
        report = validate(read_sequence(path))
        _emit(format_report(report, str(path)), args.out)
        if not report.ok:
            raise ValidationError(f"{path}: {len(report)} finding(s)")
        return

    manifest = load_manifest(path)
    rows = []
    n_bad = 0

    def check(entry):
        seq_path = manifest.resolve(entry.path)
        try:
            return entry.path, validate(read_sequence(seq_path)), None
        except (OSError, ParseError) as e:
            return entry.path, None, e

    text = []
    for name, report, err in _ordered_map(check, manifest.sequences):
        if err is not None:
            n_bad += 1
            kind = "missing-file" if isinstance(err, OSError) else err.kind
            rows.append(f"{name},{kind},,\"{err}\"\n")
        elif not report.ok:
            n_bad += 1
            text.append(format_report(report, name).split("\n", 1)[1])
    _emit("source,kind,frame,detail\n" + "".join(rows) + "".join(text), args.out)
    if n_bad:
        raise ValidationError(f"{n_bad} of {len(manifest.sequences)} sequence(s) failed validation")


# -- argument parsing -------------------------------------------------------------------

def _odd_window(value):
    try:
        w = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not an integer")
    if w < 1 or w % 2 == 0:
        raise argparse.ArgumentTypeError("window must be a positive odd integer")
    return w


def _positive(value):
    v = float(value)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="romkit", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=f"romkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def out_flag(sp):
        sp.add_argument("-o", "--out", default=None, help="output file (default stdout)")

    def analysis_flags(sp, window_default):
        sp.add_argument("--channel", default=None, help="segmentation channel, e.g. flex_IV_PIP")
        sp.add_argument("--prominence", type=_positive, default=DEFAULT_PROMINENCE, help="degrees")
        sp.add_argument("--smooth-window", type=_odd_window, default=window_default,
                        help="moving-median window in frames (1 disables)")

    sp = sub.add_parser("angles", help="per-frame flexion and abduction angles")
    sp.add_argument("input")
    sp.add_argument("--smooth-window", type=_odd_window, default=1)
    sp.add_argument("--finger", default=None, help="only this finger's channels (I..V)")
    sp.add_argument("--strict", action="store_true",
                    help="fail on validation findings or unmeasurable angles")
    out_flag(sp)
    sp.set_defaults(func=cmd_angles)

    sp = sub.add_parser("segment", help="movement cycles of one channel")
    sp.add_argument("input", help="skeleton sequence or angle table")
    analysis_flags(sp, DEFAULT_SMOOTH_WINDOW)
    sp.add_argument("--finger", default=None, help="segment this finger's PIP flexion")
    sp.add_argument("--landmarks", default=None, help="file of (start, end) frame pairs")
    out_flag(sp)
    sp.set_defaults(func=cmd_segment)

    sp = sub.add_parser("rom", help="per-channel min, max and range")
    sp.add_argument("input", help="skeleton sequence or angle table")
    sp.add_argument("--smooth-window", type=_odd_window, default=1)
    out_flag(sp)
    sp.set_defaults(func=cmd_rom)

    for name, helptext in (("aggregate", "mean/std cycle profiles of one group"),
                           ("compare", "control vs patient vs orthosis profiles")):
        sp = sub.add_parser(name, help=helptext)
        if name == "aggregate":
            sp.add_argument("manifest")
            sp.add_argument("--group", required=True, choices=LABELS)
        else:
            sp.add_argument("inputs", nargs="+", help="manifests and/or profile tables")
            sp.add_argument("--summary", action="store_true",
                            help="scalar summary per group and channel instead of curves")
        sp.add_argument("--movement", choices=("flexion", "abduction"), default="flexion")
        sp.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
        analysis_flags(sp, DEFAULT_SMOOTH_WINDOW)
        out_flag(sp)
        sp.set_defaults(func=cmd_aggregate if name == "aggregate" else cmd_compare)

    sp = sub.add_parser("synth", help="synthetic flexion sequence")
    d = SynthParams()
    sp.add_argument("--cycles", type=int, default=d.n_cycles)
    sp.add_argument("--frames-per-cycle", type=int, default=d.frames_per_cycle)
    sp.add_argument("--flexion-offset", type=float, nargs=3, default=list(d.flexion_offset),
                    metavar=("MCP", "PIP", "DIP"))
    sp.add_argument("--flexion-amplitude", type=float, nargs=3, default=list(d.flexion_amplitude),
                    metavar=("MCP", "PIP", "DIP"))
    sp.add_argument("--abduction-amplitude", type=float, default=d.abduction_amplitude)
    sp.add_argument("--noise", type=float, default=d.noise_sigma, help="jitter, degrees equivalent")
    sp.add_argument("--seed", type=int, default=d.seed)
    sp.add_argument("--frame-rate", type=float, default=d.frame_rate)
    sp.add_argument("--handedness", choices=("left", "right"), default=d.handedness)
    out_flag(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("validate", help="check a sequence file or a manifest")
    sp.add_argument("input")
    out_flag(sp)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args.func(args)
    except RomkitError as e:
        _warn(f"error: {e}")
        return e.exit_code
    except FileNotFoundError as e:
        _warn(f"error: {e.strerror}: {e.filename}")
        return UsageError.exit_code
    except ValueError as e:  # bad enum names and similar argument values
        _warn(f"error: {e}")
        return UsageError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
