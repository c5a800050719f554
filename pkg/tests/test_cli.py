import csv
import inspect
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import romkit.errors as errors
from romkit import cli
from romkit.analysis import angle_series, rom_summary
from romkit.dataset import parse_angles, read_sequence, write_sequence
from romkit.skeleton import SkeletonSequence
from romkit.synth import SynthParams, generate_synthetic, write_synthetic_dataset

CORPUS = Path(__file__).parent / "data" / "malformed"


def run(*argv):
    return cli.main([str(a) for a in argv])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def synth_file(tmp_path):
    path = tmp_path / "s.csv"
    assert run("synth", "--cycles", 3, "--noise", 1, "--seed", 4, "-o", path) == 0
    return path


@pytest.fixture(scope="module")
def three_groups(tmp_path_factory):
    root = tmp_path_factory.mktemp("groups")
    groups = {
        "control": SynthParams(noise_sigma=1.0, flexion_amplitude=(30, 40, 25)),
        "patient": SynthParams(noise_sigma=1.0, flexion_amplitude=(15, 20, 12)),
        "orthosis": SynthParams(noise_sigma=1.0, flexion_amplitude=(22, 30, 18)),
    }
    return write_synthetic_dataset(root, groups, sequences_per_group=3)


def test_segment_counts_cycles(synth_file, tmp_path):
    out = tmp_path / "cycles.csv"
    assert run("segment", synth_file, "-o", out) == 0
    cycles = rows(out)
    assert len(cycles) == 3
    peaks = [int(c["peak_frame"]) for c in cycles]
    assert np.max(np.abs(np.array(peaks) - [30, 90, 150])) <= 2
    assert {c["channel"] for c in cycles} == {"flex_IV_PIP"}


def test_segment_with_landmarks(synth_file, tmp_path):
    marks = tmp_path / "marks.txt"
    marks.write_text("0 59\n60 119\n")
    out = tmp_path / "cycles.csv"
    assert run("segment", synth_file, "--landmarks", marks, "--finger", "II", "-o", out) == 0
    got = rows(out)
    assert [(c["start_frame"], c["end_frame"], c["source"]) for c in got] == [
        ("0", "59", "landmark"), ("60", "119", "landmark")]
    assert got[0]["channel"] == "flex_II_PIP"


def test_single_frame_angles(tmp_path):
    one = tmp_path / "one.csv"
    full = generate_synthetic(SynthParams(n_cycles=1, frames_per_cycle=8))
    write_sequence(SkeletonSequence(full.positions[:1], full.timestamps[:1]), one)
    out = tmp_path / "a.csv"
    assert run("angles", one, "-o", out) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    assert len(lines[0].split(",")) == 21


def test_angles_finger_subset(synth_file, tmp_path):
    out = tmp_path / "a.csv"
    assert run("angles", synth_file, "--finger", "IV", "-o", out) == 0
    header = out.read_text().splitlines()[0].split(",")
    assert header == ["frame", "flex_IV_MCP", "flex_IV_PIP", "flex_IV_DIP", "abd_IV"]


def test_angles_then_rom_matches_library(synth_file, tmp_path):
    table = tmp_path / "a.csv"
    rom_out = tmp_path / "rom.csv"
    assert run("angles", synth_file, "-o", table) == 0
    assert run("rom", table, "-o", rom_out) == 0
    ref = rom_summary(angle_series(read_sequence(synth_file)))
    got = rows(rom_out)
    assert len(got) == 20
    for r in got:
        e = ref[r["channel"]]
        assert abs(float(r["min"]) - e.min) < 1e-9
        assert abs(float(r["max"]) - e.max) < 1e-9
        assert abs(float(r["range"]) - e.range) < 1e-9
    # rom straight from the sequence agrees byte for byte
    direct = tmp_path / "rom2.csv"
    assert run("rom", synth_file, "-o", direct) == 0
    assert direct.read_bytes() == rom_out.read_bytes()


def test_angles_table_matches_library(synth_file, tmp_path):
    out = tmp_path / "a.csv"
    run("angles", synth_file, "-o", out)
    ref = angle_series(read_sequence(synth_file)).values
    assert np.max(np.abs(parse_angles(out).values - ref)) < 1e-9


def test_synth_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run("synth", "--noise", 2, "--seed", 11, "-o", tmp_path / f"{name}.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_synth_to_stdout(capsys):
    assert run("synth", "--cycles", 1, "--frames-per-cycle", 8) == 0
    out = capsys.readouterr().out
    assert out.startswith("# romkit-sequence v1\n")
    assert len([l for l in out.splitlines() if l[:1].isdigit()]) == 9


def test_aggregate_group(three_groups, tmp_path):
    out = tmp_path / "p.csv"
    assert run("aggregate", three_groups, "--group", "patient", "-o", out) == 0
    got = [r for r in rows(out) if r["channel"] == "flex_IV_PIP"]
    assert len(got) == 100
    assert len(rows(out)) == 2000  # every channel, resampled on the same cycles
    assert {r["label"] for r in got} == {"patient"}
    assert got[0]["n_cycles"] == "9"


def test_compare_orders_peaks(three_groups, tmp_path):
    out = tmp_path / "summary.csv"
    assert run("compare", three_groups, "--summary", "-o", out) == 0
    peaks = {r["label"]: float(r["peak_mean"]) for r in rows(out) if r["channel"] == "flex_IV_PIP"}
    assert peaks["control"] > peaks["orthosis"] > peaks["patient"]
    assert abs(peaks["control"] - 90) < 2 and abs(peaks["patient"] - 70) < 2


def test_compare_from_profile_tables(three_groups, tmp_path):
    tables = []
    for g in ("control", "patient"):
        tables.append(tmp_path / f"{g}.csv")
        assert run("aggregate", three_groups, "--group", g, "-o", tables[-1]) == 0
    via_tables = tmp_path / "t.csv"
    via_manifest = tmp_path / "m.csv"
    assert run("compare", *tables, "-o", via_tables) == 0
    assert run("compare", three_groups, "-o", via_manifest) == 0
    manifest_rows = [r for r in rows(via_manifest) if r["label"] != "orthosis"]
    table_rows = rows(via_tables)
    assert len(table_rows) == len(manifest_rows) == 4000
    for a, b in zip(table_rows, manifest_rows):
        assert (a["label"], a["x"]) == (b["label"], b["x"])
        assert abs(float(a["mean"]) - float(b["mean"])) < 1e-9


def test_compare_same_group_twice(three_groups, tmp_path):
    assert run("compare", three_groups, three_groups) == errors.ValidationError.exit_code


def test_threads_do_not_change_output(three_groups, tmp_path, monkeypatch):
    outs = []
    for n in ("1", "4"):
        monkeypatch.setenv("ROMKIT_THREADS", n)
        outs.append(tmp_path / f"t{n}.csv")
        assert run("compare", three_groups, "-o", outs[-1]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()
    monkeypatch.setenv("ROMKIT_THREADS", "many")
    assert run("compare", three_groups) == 2


def test_validate_sequence_and_manifest(synth_file, three_groups, tmp_path, capsys):
    assert run("validate", synth_file) == 0
    assert run("validate", three_groups) == 0
    bad = read_sequence(synth_file).positions.copy()
    bad[5, 9] = np.nan
    broken = tmp_path / "sequences" / "broken.csv"
    broken.parent.mkdir()
    write_sequence(SkeletonSequence(bad), broken)
    capsys.readouterr()
    assert run("validate", broken) == 4
    assert "non-finite,5,III_MCP" in capsys.readouterr().out
    man = tmp_path / "m.yaml"
    man.write_text(
        "subjects: [{id: C1, group: control}]\n"
        "sequences:\n"
        "  - {path: sequences/broken.csv, subject: C1, hand: right, movement: flexion}\n"
        "  - {path: sequences/gone.csv, subject: C1, hand: right, movement: flexion}\n"
    )
    assert run("validate", man) == 4
    out = capsys.readouterr().out
    assert "missing-file" in out and "non-finite" in out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "romkit", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("romkit ")


# -- exit codes -----------------------------------------------------------------

FAMILY = {
    errors.UsageError: 2,
    errors.ParseError: 3,
    errors.ValidationError: 4,
    errors.DegenerateGeometryError: 5,
}


@pytest.mark.parametrize(
    "cls",
    [c for _, c in inspect.getmembers(errors, inspect.isclass)
     if issubclass(c, errors.RomkitError) and c is not errors.RomkitError],
)
def test_every_error_belongs_to_one_family(cls):
    fams = [code for base, code in FAMILY.items() if issubclass(cls, base)]
    assert len(fams) == 1
    assert cls.exit_code == fams[0]


def test_exit_code_usage(synth_file):
    assert run("angles") == 2
    assert run("segment", synth_file, "--smooth-window", 4) == 2
    assert run("segment", synth_file, "--channel", "flex_VI_PIP") == 2
    assert run("angles", synth_file, "--finger", "VII") == 2
    assert run("rom", "/no/such/file.csv") == 2
    assert run("synth", "--cycles", 0) == 2


@pytest.mark.parametrize("name", ["bad_magic.csv", "row_62_coordinates.csv", "skipped_frame_index.csv"])
def test_exit_code_parse(name, capsys):
    assert run("angles", CORPUS / name) == 3
    assert "line" in capsys.readouterr().err


def test_exit_code_validation(synth_file, tmp_path):
    marks = tmp_path / "m.txt"
    marks.write_text("50 10\n")
    assert run("segment", synth_file, "--landmarks", marks) == 4
    man = tmp_path / "bad.yaml"
    man.write_text(
        "subjects: [{id: C1, group: control}]\n"
        "sequences: [{path: a.csv, subject: C1, hand: right, movement: flexion, orthosis: true}]\n"
    )
    assert run("aggregate", man, "--group", "control") == 4
    bad = read_sequence(synth_file).positions.copy()
    bad[2, 0] = np.inf
    p = tmp_path / "inf.csv"
    write_sequence(SkeletonSequence(bad), p)
    assert run("angles", p, "--strict") == 4
    assert run("angles", p) == 0


def test_exit_code_degenerate(synth_file, tmp_path):
    pos = read_sequence(synth_file).positions.copy()
    pos[:, 14] = pos[:, 13]  # IV_PIP collapses onto IV_MCP on every frame
    p = tmp_path / "flat.csv"
    write_sequence(SkeletonSequence(pos), p)
    assert run("segment", p) == 5
    pos = read_sequence(synth_file).positions.copy()
    pos[3, 14] = pos[3, 13]
    write_sequence(SkeletonSequence(pos), p)
    assert run("angles", p) == 0
    assert run("angles", p, "--strict") == 4  # zero-length bone is a validation finding first
