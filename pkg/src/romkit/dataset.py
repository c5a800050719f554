"""
File formats: skeleton sequences, dataset manifests, and result tables.

The byte-level layout of every format is documented in docs/formats.md.
All floats are written with 17 significant digits so they parse back to the
identical binary value.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import yaml

from .analysis import AngleSeries, CycleProfile, MovementCycle, RomSummary
from .errors import (
    ColumnCountError,
    EmptyFileError,
    FrameIndexError,
    MalformedHeaderError,
    ManifestError,
    NonNumericCellError,
    ParseError,
)
from .skeleton import (
    DEFAULT_FRAME_RATE,
    JOINT_NAMES,
    Handedness,
    SkeletonSequence,
    ValidationReport,
)

FORMAT_MAGIC = "romkit-sequence"
FORMAT_VERSION = "1"
HEADER_KEYS = ("handedness", "frame_rate", "timestamps", "joints")
COORD_COLUMNS = tuple(f"{name}_{ax}" for name in JOINT_NAMES for ax in "xyz")
SEQUENCE_COLUMNS = ("frame", "timestamp") + COORD_COLUMNS

Source = Union[str, os.PathLike, IO]


def fmt(x: float) -> str:
    """17 significant digits, enough for an exact float round-trip."""
    return format(float(x), ".17g")


def _cell(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return fmt(x)


def _read_text(source: Source) -> str:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def _open_sink(sink):
    """Return (text stream, close?)."""
    if isinstance(sink, (str, os.PathLike)):
        return open(sink, "w", encoding="utf-8", newline=""), True
    if isinstance(sink, (io.RawIOBase, io.BufferedIOBase)) or "b" in getattr(sink, "mode", ""):
        return io.TextIOWrapper(sink, encoding="utf-8", newline="", write_through=True), False
    return sink, False


def _write_text(sink, text: str):
    out, close = _open_sink(sink)
    try:
        out.write(text)
        out.flush()
    finally:
        if close:
            out.close()
        elif isinstance(out, io.TextIOWrapper) and out is not sink:
            out.detach()


# -- skeleton sequences -------------------------------------------------------------

def _float(cell: str, line: int, what: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise NonNumericCellError(f"{what}: {cell!r} is not a number", line) from None


def parse_sequence(source: Source, sequence_id: str = "") -> SkeletonSequence:
    """
    Parse a skeleton sequence file.

    Raises a :class:`~romkit.errors.ParseError` subclass carrying the 1-based
    line number of the first problem.
    """
    text = _read_text(source)
    lines = text.splitlines()
    if not any(l.strip() for l in lines):
        raise EmptyFileError("file is empty", 1)

    lineno = 0

    def next_line():
        nonlocal lineno
        while lineno < len(lines):
            lineno += 1
            if lines[lineno - 1].strip():
                return lines[lineno - 1]
        return None

    first = next_line()
    if first.strip() != f"# {FORMAT_MAGIC} v{FORMAT_VERSION}":
        raise MalformedHeaderError(
            f"expected '# {FORMAT_MAGIC} v{FORMAT_VERSION}', got {first.strip()!r}", lineno
        )
    header = {}
    while True:
        line = next_line()
        if line is None:
            raise MalformedHeaderError("missing column header row", lineno + 1)
        if not line.startswith("#"):
            break
        key, sep, value = line[1:].partition(":")
        key = key.strip()
        if not sep or key not in HEADER_KEYS:
            raise MalformedHeaderError(f"unrecognised header line {line.strip()!r}", lineno)
        if key in header:
            raise MalformedHeaderError(f"duplicate header key {key!r}", lineno)
        header[key] = (value.strip(), lineno)
    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise MalformedHeaderError(f"missing header keys: {', '.join(missing)}", lineno)

    value, at = header["handedness"]
    try:
        handedness = Handedness(value)
    except ValueError:
        raise MalformedHeaderError(f"handedness must be left or right, got {value!r}", at) from None
    value, at = header["frame_rate"]
    try:
        frame_rate = float(value)
    except ValueError:
        frame_rate = float("nan")
    if not (math.isfinite(frame_rate) and frame_rate > 0):
        raise MalformedHeaderError(f"frame_rate must be a positive number, got {value!r}", at)
    value, at = header["timestamps"]
    if value not in ("true", "false"):
        raise MalformedHeaderError(f"timestamps must be true or false, got {value!r}", at)
    has_time = value == "true"
    value, at = header["joints"]
    if tuple(v.strip() for v in value.split(",")) != JOINT_NAMES:
        raise MalformedHeaderError("joint order differs from the canonical 21-joint order", at)

    columns = tuple(c.strip() for c in line.split(","))
    expected_cols = SEQUENCE_COLUMNS if has_time else ("frame",) + COORD_COLUMNS
    if columns != expected_cols:
        raise MalformedHeaderError("column header row does not match the declared layout", lineno)

    width = len(expected_cols)
    rows, stamps = [], []
    while True:
        line = next_line()
        if line is None:
            break
        if line.startswith("#"):
            raise MalformedHeaderError("header line after data rows", lineno)
        cells = line.split(",")
        if len(cells) != width:
            raise ColumnCountError(f"expected {width} columns, got {len(cells)}", lineno)
        try:
            idx = int(cells[0])
        except ValueError:
            raise NonNumericCellError(f"frame index {cells[0]!r} is not an integer", lineno) from None
        if idx != len(rows):
            raise FrameIndexError(f"frame index {idx}, expected {len(rows)}", lineno)
        k = 1
        if has_time:
            stamps.append(_float(cells[1], lineno, "timestamp"))
            k = 2
        rows.append([_float(c, lineno, COORD_COLUMNS[i]) for i, c in enumerate(cells[k:])])
    if not rows:
        raise EmptyFileError("no frames", lineno + 1)

    positions = np.array(rows, dtype=float).reshape(-1, 21, 3)
    return SkeletonSequence(
        positions,
        np.array(stamps) if has_time else None,
        handedness,
        frame_rate,
        sequence_id,
    )


def read_sequence(path: Union[str, os.PathLike]) -> SkeletonSequence:
    return parse_sequence(path, sequence_id=Path(path).stem)


def format_sequence(seq: SkeletonSequence) -> str:
    has_time = seq.timestamps is not None
    out = [
        f"# {FORMAT_MAGIC} v{FORMAT_VERSION}\n",
        f"# handedness: {seq.handedness.value}\n",
        f"# frame_rate: {fmt(seq.frame_rate)}\n",
        f"# timestamps: {'true' if has_time else 'false'}\n",
        f"# joints: {','.join(JOINT_NAMES)}\n",
        ",".join(SEQUENCE_COLUMNS if has_time else ("frame",) + COORD_COLUMNS) + "\n",
    ]
    flat = seq.positions.reshape(len(seq), 63)
    for i in range(len(seq)):
        cells = [str(i)]
        if has_time:
            cells.append(fmt(seq.timestamps[i]))
        cells.extend(fmt(v) for v in flat[i])
        out.append(",".join(cells) + "\n")
    return "".join(out)


def write_sequence(seq: SkeletonSequence, sink) -> None:
    if len(seq) == 0:
        raise ValueError("refusing to write an empty sequence")
    _write_text(sink, format_sequence(seq))


# -- landmarks -------------------------------------------------------------------------

def parse_landmarks(source: Source) -> list[tuple[int, int]]:
    """Two integer columns (start, end) per line; comma or whitespace separated;
    '#' starts a comment."""
    pairs = []
    for n, raw in enumerate(_read_text(source).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        cells = line.replace(",", " ").split()
        if len(cells) != 2:
            raise ColumnCountError(f"expected 2 columns, got {len(cells)}", n)
        try:
            pairs.append((int(cells[0]), int(cells[1])))
        except ValueError:
            raise NonNumericCellError(f"landmark frames must be integers: {line!r}", n) from None
    return pairs


# -- manifest -----------------------------------------------------------------------------

GROUPS = ("control", "patient")
MOVEMENTS = ("flexion", "abduction")
LABELS = ("control", "patient", "orthosis")


@dataclass(frozen=True)
class Subject:
    id: str
    group: str
    notes: str = ""


@dataclass(frozen=True)
class SequenceEntry:
    path: str
    subject: str
    hand: str
    movement: str
    orthosis: bool = False
    frame_rate: float = DEFAULT_FRAME_RATE
    landmarks: Optional[str] = None


@dataclass
class DatasetManifest:
    subjects: list[Subject] = field(default_factory=list)
    sequences: list[SequenceEntry] = field(default_factory=list)
    root: Path = field(default_factory=Path)

    def subject(self, sid: str) -> Subject:
        return next(s for s in self.subjects if s.id == sid)

    def label(self, entry: SequenceEntry) -> str:
        """control, patient, or orthosis (patient wearing the orthosis)."""
        if self.subject(entry.subject).group == "control":
            return "control"
        return "orthosis" if entry.orthosis else "patient"

    def select(self, label: str, movement: Optional[str] = "flexion") -> list[SequenceEntry]:
        if label not in LABELS:
            raise ManifestError(f"unknown group label {label!r}; use one of {', '.join(LABELS)}")
        return [
            e for e in self.sequences
            if self.label(e) == label and (movement is None or e.movement == movement)
        ]

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.root / p

    def counts(self) -> dict[str, int]:
        patients = [s for s in self.subjects if s.group == "patient"]
        labels = [self.label(e) for e in self.sequences]
        return {
            "patients": len(patients),
            "control_subjects": len(self.subjects) - len(patients),
            "patient_sequences": labels.count("patient") + labels.count("orthosis"),
            "orthosis_sequences": labels.count("orthosis"),
            "control_sequences": labels.count("control"),
        }


def _require(d, key, where):
    if key not in d:
        raise ManifestError(f"{where}: missing key {key!r}")
    return d[key]


def _check_keys(d, allowed, where):
    extra = set(d) - set(allowed)
    if extra:
        raise ManifestError(f"{where}: unknown keys {sorted(extra)}")


def load_manifest(source: Source) -> DatasetManifest:
    """
    Load and validate a YAML manifest. Relative sequence paths resolve
    against the manifest's directory (or the working directory for streams).
    """
    root = Path(source).parent if isinstance(source, (str, os.PathLike)) else Path(".")
    try:
        doc = yaml.safe_load(_read_text(source))
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ParseError(f"invalid YAML: {e}", mark.line + 1 if mark else 1) from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ManifestError("manifest must be a mapping with 'subjects' and 'sequences'")
    _check_keys(doc, ("subjects", "sequences"), "manifest")

    subjects = []
    for k, s in enumerate(doc.get("subjects") or []):
        where = f"subjects[{k}]"
        if not isinstance(s, dict):
            raise ManifestError(f"{where}: expected a mapping")
        _check_keys(s, ("id", "group", "notes"), where)
        group = _require(s, "group", where)
        if group not in GROUPS:
            raise ManifestError(f"{where}: group must be control or patient, got {group!r}")
        subjects.append(Subject(str(_require(s, "id", where)), group, str(s.get("notes") or "")))
    ids = [s.id for s in subjects]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        raise ManifestError(f"duplicate subject ids: {sorted(dup)}")
    groups = {s.id: s.group for s in subjects}

    sequences = []
    seen = set()
    for k, e in enumerate(doc.get("sequences") or []):
        where = f"sequences[{k}]"
        if not isinstance(e, dict):
            raise ManifestError(f"{where}: expected a mapping")
        _check_keys(e, ("path", "subject", "hand", "movement", "orthosis", "frame_rate", "landmarks"), where)
        path = str(_require(e, "path", where))
        sid = str(_require(e, "subject", where))
        hand = _require(e, "hand", where)
        movement = _require(e, "movement", where)
        orthosis = e.get("orthosis", False)
        rate = e.get("frame_rate", DEFAULT_FRAME_RATE)
        if sid not in groups:
            raise ManifestError(f"{where}: unknown subject {sid!r}")
        if hand not in ("left", "right"):
            raise ManifestError(f"{where}: hand must be left or right, got {hand!r}")
        if movement not in MOVEMENTS:
            raise ManifestError(f"{where}: movement must be flexion or abduction, got {movement!r}")
        if not isinstance(orthosis, bool):
            raise ManifestError(f"{where}: orthosis must be true or false")
        if orthosis and groups[sid] != "patient":
            raise ManifestError(f"{where}: orthosis is only allowed for patients ({sid} is control)")
        if isinstance(rate, bool) or not isinstance(rate, (int, float)) or not rate > 0:
            raise ManifestError(f"{where}: frame_rate must be a positive number")
        if path in seen:
            raise ManifestError(f"{where}: duplicate sequence path {path!r}")
        seen.add(path)
        marks = e.get("landmarks")
        sequences.append(
            SequenceEntry(path, sid, hand, movement, orthosis, float(rate), None if marks is None else str(marks))
        )
    return DatasetManifest(subjects, sequences, root)


def dump_manifest(manifest: DatasetManifest) -> str:
    doc = {
        "subjects": [{"id": s.id, "group": s.group, "notes": s.notes} for s in manifest.subjects],
        "sequences": [],
    }
    for e in manifest.sequences:
        d = {
            "path": e.path, "subject": e.subject, "hand": e.hand, "movement": e.movement,
            "orthosis": e.orthosis, "frame_rate": e.frame_rate,
        }
        if e.landmarks is not None:
            d["landmarks"] = e.landmarks
        doc["sequences"].append(d)
    return yaml.safe_dump(doc, sort_keys=False)


# -- result tables ---------------------------------------------------------------------------

def _table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def format_angles(series: AngleSeries) -> str:
    return _table(
        ("frame",) + series.channels,
        ([str(i)] + [_cell(v) for v in row] for i, row in enumerate(series.values)),
    )


def write_angles(series: AngleSeries, sink) -> None:
    _write_text(sink, format_angles(series))


def _csv_rows(source: Source):
    text = _read_text(source)
    if not text.strip():
        raise EmptyFileError("file is empty", 1)
    return list(csv.reader(io.StringIO(text)))


def _table_float(cell, line, what):
    return float("nan") if cell == "" else _float(cell, line, what)


def parse_angles(source: Source, frame_rate: float = DEFAULT_FRAME_RATE, sequence_id: str = "") -> AngleSeries:
    rows = _csv_rows(source)
    header = rows[0]
    if not header or header[0] != "frame" or len(header) < 2:
        raise MalformedHeaderError("angle table must start with a 'frame' column", 1)
    channels = tuple(header[1:])
    values = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ColumnCountError(f"expected {len(header)} columns, got {len(row)}", n)
        values.append([_table_float(c, n, channels[i]) for i, c in enumerate(row[1:])])
    if not values:
        raise EmptyFileError("no frames", len(rows) + 1)
    return AngleSeries(np.array(values), channels, frame_rate, sequence_id)


CYCLE_COLUMNS = ("sequence", "cycle", "channel", "start_frame", "peak_frame", "end_frame", "source")


def format_cycles(cycles: Sequence[MovementCycle], sequence_id: str = "") -> str:
    return _table(
        CYCLE_COLUMNS,
        (
            [sequence_id, str(k), c.channel, str(c.start_frame), str(c.peak_frame), str(c.end_frame), c.source]
            for k, c in enumerate(cycles)
        ),
    )


def write_cycles(cycles: Sequence[MovementCycle], sink, sequence_id: str = "") -> None:
    _write_text(sink, format_cycles(cycles, sequence_id))


PROFILE_COLUMNS = ("label", "channel", "x", "mean", "std", "n_cycles")


def format_profile(profiles, label: str = "") -> str:
    """
    Long-format profile table. ``profiles`` is a CycleProfile, a list of them
    (all under ``label``), or a mapping label -> list of profiles.
    """
    if isinstance(profiles, CycleProfile):
        profiles = {label: [profiles]}
    elif not isinstance(profiles, Mapping):
        profiles = {label: list(profiles)}
    rows = []
    for lab, plist in profiles.items():
        if isinstance(plist, CycleProfile):
            plist = [plist]
        for p in plist:
            for x, m, s in zip(p.x, p.mean, p.std):
                rows.append([lab, p.channel, fmt(x), fmt(m), fmt(s), str(p.n_cycles)])
    return _table(PROFILE_COLUMNS, rows)


def write_profile(profiles, sink, label: str = "") -> None:
    _write_text(sink, format_profile(profiles, label))


def parse_profiles(source: Source) -> dict[str, dict[str, CycleProfile]]:
    """Inverse of :func:`format_profile`: label -> channel -> profile."""
    rows = _csv_rows(source)
    if tuple(rows[0]) != PROFILE_COLUMNS:
        raise MalformedHeaderError(f"profile header must be {','.join(PROFILE_COLUMNS)}", 1)
    acc: dict[tuple[str, str], list] = {}
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(PROFILE_COLUMNS):
            raise ColumnCountError(f"expected {len(PROFILE_COLUMNS)} columns, got {len(row)}", n)
        lab, ch = row[0], row[1]
        m, s = _float(row[3], n, "mean"), _float(row[4], n, "std")
        try:
            k = int(row[5])
        except ValueError:
            raise NonNumericCellError(f"n_cycles {row[5]!r} is not an integer", n) from None
        acc.setdefault((lab, ch), []).append((m, s, k))
    out: dict[str, dict[str, CycleProfile]] = {}
    for (lab, ch), vals in acc.items():
        arr = np.array([v[:2] for v in vals])
        out.setdefault(lab, {})[ch] = CycleProfile(ch, arr[:, 0], arr[:, 1], vals[0][2])
    return out


ROM_COLUMNS = ("channel", "min", "max", "range")


def format_rom(summary: RomSummary) -> str:
    return _table(
        ROM_COLUMNS,
        (
            [ch, "", "", ""] if e is None else [ch, fmt(e.min), fmt(e.max), fmt(e.range)]
            for ch, e in summary
        ),
    )


def write_rom(summary: RomSummary, sink) -> None:
    _write_text(sink, format_rom(summary))


SUMMARY_COLUMNS = ("label", "channel", "n_cycles", "peak_mean", "mean_std", "mean_range")


def format_summaries(summaries) -> str:
    return _table(
        SUMMARY_COLUMNS,
        (
            [s.label, s.channel, str(s.n_cycles), fmt(s.peak_mean), fmt(s.mean_std), fmt(s.mean_range)]
            for s in summaries
        ),
    )


def format_report(report: ValidationReport, source: str = "") -> str:
    return _table(
        ("source", "kind", "frame", "detail"),
        ([source, f.kind, "" if f.frame is None else str(f.frame), f.detail] for f in report),
    )
