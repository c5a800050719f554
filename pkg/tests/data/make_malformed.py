"""Regenerate the malformed sequence corpus and its EXPECTED.yaml index.

Run from the repository root: python tests/data/make_malformed.py
"""
from pathlib import Path

import yaml

from romkit.dataset import format_sequence
from romkit.synth import SynthParams, generate_synthetic

HERE = Path(__file__).parent / "malformed"

good = format_sequence(generate_synthetic(SynthParams(n_cycles=1, frames_per_cycle=8)))
lines = good.splitlines(keepends=True)
# lines[0..4] header comments, lines[5] column row, lines[6:] data (frame 0 at line 7)


def replace(i, text):
    out = list(lines)
    out[i] = text
    return "".join(out)


def cells(i):
    return lines[i].rstrip("\n").split(",")


def row(c):
    return ",".join(c) + "\n"


cases = {}


def case(name, text, kind, line):
    cases[name] = {"error": kind, "line": line}
    (HERE / name).write_text(text, encoding="utf-8")


case("empty.csv", "", "empty-file", 1)
case("blank_lines_only.csv", "\n  \n\n", "empty-file", 1)
case("bad_magic.csv", replace(0, "# other-format v1\n"), "malformed-header", 1)
case("bad_version.csv", replace(0, "# romkit-sequence v2\n"), "malformed-header", 1)
case("bad_handedness.csv", replace(1, "# handedness: both\n"), "malformed-header", 2)
case("bad_frame_rate.csv", replace(2, "# frame_rate: -30\n"), "malformed-header", 3)
case("bad_timestamps_flag.csv", replace(3, "# timestamps: yes\n"), "malformed-header", 4)
swapped = lines[4].replace("II_MCP,II_PIP", "II_PIP,II_MCP")
case("joint_order_swapped.csv", replace(4, swapped), "malformed-header", 5)
case("missing_frame_rate.csv", "".join(lines[:2] + lines[3:]), "malformed-header", 5)
case("unknown_header_key.csv", replace(3, "# units: mm\n"), "malformed-header", 4)
case("column_row_mismatch.csv", replace(5, lines[5].replace("WRIST_x", "WRIST_X")), "malformed-header", 6)
case("no_column_row.csv", "".join(lines[:5]), "malformed-header", 6)
case("header_only.csv", "".join(lines[:6]), "empty-file", 7)
case("row_62_coordinates.csv", replace(7, row(cells(7)[:-1])), "wrong-column-count", 8)
case("row_extra_column.csv", replace(6, row(cells(6) + ["1.0"])), "wrong-column-count", 7)
c = cells(8); c[10] = "abc"
case("non_numeric_coordinate.csv", replace(8, row(c)), "non-numeric-cell", 9)
c = cells(6); c[1] = "t0"
case("non_numeric_timestamp.csv", replace(6, row(c)), "non-numeric-cell", 7)
c = cells(9); c[30] = ""
case("empty_coordinate_cell.csv", replace(9, row(c)), "non-numeric-cell", 10)
c = cells(7); c[0] = "1.5"
case("fractional_frame_index.csv", replace(7, row(c)), "non-numeric-cell", 8)
c = cells(7); c[0] = "2"
case("skipped_frame_index.csv", replace(7, row(c)), "bad-frame-index", 8)
case("comment_after_data.csv", "".join(lines[:8] + ["# note\n"] + lines[8:]), "malformed-header", 9)

(HERE / "EXPECTED.yaml").write_text(yaml.safe_dump(cases, sort_keys=True), encoding="utf-8")
