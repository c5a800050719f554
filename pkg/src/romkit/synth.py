"""
Synthetic hand motion: repeated flexion pulses on a kinematic finger chain.

Each finger bends in its own plane, perpendicular to the palm and rotated
about the palm normal by the finger's abduction. Within that plane the joint
flexions follow ``offset - amplitude * cos(2 pi t / frames_per_cycle)``, so
every cycle starts and ends with the hand open. The hand is then placed in
camera space by a fixed rigid transform and optional Gaussian jitter is added
to every joint.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import UsageError
from .skeleton import Finger, Handedness, SkeletonSequence, finger_chain

# hand-local frame: x radial, y distal, z dorsal; flexion bends toward -z
_MCP = {
    Finger.I: (22.0, 26.0, 0.0),  # thumb CMC
    Finger.II: (24.0, 70.0, 0.0),
    Finger.III: (4.0, 74.0, 0.0),
    Finger.IV: (-15.0, 69.0, 0.0),
    Finger.V: (-32.0, 60.0, 0.0),
}
# proximal, middle, distal segment lengths (mm) beyond the MCP slot
_SEGMENTS = {
    Finger.I: (38.0, 30.0, 26.0),
    Finger.II: (40.0, 25.0, 20.0),
    Finger.III: (45.0, 28.0, 22.0),
    Finger.IV: (42.0, 27.0, 21.0),
    Finger.V: (33.0, 20.0, 18.0),
}
# share of the abduction amplitude each finger receives; sign = side
_SPREAD = {Finger.I: 1.0, Finger.II: 0.5, Finger.III: 0.0, Finger.IV: -0.5, Finger.V: -1.0}

_CAMERA_ROTATION = Rotation.from_euler("xyz", [25.0, -15.0, 10.0], degrees=True)
_CAMERA_OFFSET = np.array([10.0, -20.0, 450.0])

# per-coordinate jitter (mm) per degree of noise_sigma; gives roughly
# noise_sigma degrees of jitter on the PIP flexion channels
NOISE_LEVER_MM = 12.0


@dataclass(frozen=True)
class SynthParams:
    n_cycles: int = 3
    frames_per_cycle: int = 60
    flexion_offset: tuple[float, float, float] = (35.0, 50.0, 30.0)  # MCP, PIP, DIP
    flexion_amplitude: tuple[float, float, float] = (30.0, 40.0, 25.0)
    abduction_amplitude: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0
    frame_rate: float = 30.0
    handedness: str = "right"

    def __post_init__(self):
        object.__setattr__(self, "flexion_offset", tuple(float(v) for v in self.flexion_offset))
        object.__setattr__(self, "flexion_amplitude", tuple(float(v) for v in self.flexion_amplitude))
        if len(self.flexion_offset) != 3 or len(self.flexion_amplitude) != 3:
            raise UsageError("flexion offset and amplitude need one value per joint (MCP, PIP, DIP)")
        if int(self.n_cycles) != self.n_cycles or self.n_cycles < 1:
            raise UsageError(f"n_cycles must be a positive integer, got {self.n_cycles!r}")
        if int(self.frames_per_cycle) != self.frames_per_cycle or self.frames_per_cycle < 8:
            raise UsageError(f"frames_per_cycle must be an integer >= 8, got {self.frames_per_cycle!r}")
        if min(self.flexion_amplitude) < 0 or self.abduction_amplitude < 0:
            raise UsageError("amplitudes must be >= 0")
        if self.noise_sigma < 0:
            raise UsageError("noise_sigma must be >= 0")
        if not self.frame_rate > 0:
            raise UsageError("frame_rate must be positive")
        try:
            Handedness(self.handedness)
        except ValueError:
            raise UsageError(f"handedness must be left or right, got {self.handedness!r}") from None
        lo = [o - a for o, a in zip(self.flexion_offset, self.flexion_amplitude)]
        hi = [o + a for o, a in zip(self.flexion_offset, self.flexion_amplitude)]
        if min(lo) < 0 or max(hi) > 180:
            raise UsageError("driving flexion must stay within [0, 180] degrees")
        if hi[0] >= 90:
            raise UsageError("MCP flexion must stay below 90 degrees")
        if sum(hi) >= 270:
            raise UsageError("total finger flexion must stay below 270 degrees")
        if lo[0] < self.abduction_amplitude:
            raise UsageError("MCP flexion must not fall below the abduction amplitude")

    @property
    def n_frames(self) -> int:
        return self.n_cycles * self.frames_per_cycle + 1


def driving_angles(params: SynthParams, t=None) -> tuple[np.ndarray, np.ndarray]:
    """
    Driving joint flexions (n, 3) and signed abduction factor (n,) in degrees,
    at frame times ``t`` (default: every frame; fractional times allowed).
    The abduction of finger f is ``factor * spread_f``.
    """
    if t is None:
        t = np.arange(params.n_frames)
    phase = np.cos(2 * np.pi * np.asarray(t, dtype=float) / params.frames_per_cycle)
    off = np.array(params.flexion_offset)
    amp = np.array(params.flexion_amplitude)
    flex = off[None, :] - amp[None, :] * phase[:, None]
    abd = params.abduction_amplitude * 0.5 * (1.0 - phase)
    return flex, abd


def expected_angles(params: SynthParams, t=None) -> np.ndarray:
    """
    Noise-free angles the analysis should report, (n, 20) degrees in channel
    order. PIP and DIP equal the driving flexions; abduction is the absolute
    driven deviation; MCP combines the in-plane flexion with the abduction,
    ``arccos(cos flex * cos abd)``, which reduces to the driving value when
    no abduction is driven.
    """
    flex, abd = driving_angles(params, t)
    cols = []
    abd_cols = []
    for f in Finger:
        alpha = np.radians(abd * _SPREAD[f])
        mcp = np.degrees(np.arccos(np.cos(np.radians(flex[:, 0])) * np.cos(alpha)))
        cols += [mcp, flex[:, 1], flex[:, 2]]
        abd_cols.append(np.abs(np.degrees(alpha)))
    return np.column_stack(cols + abd_cols)


def _hand_positions(params: SynthParams) -> np.ndarray:
    flex, abd = driving_angles(params)
    n = flex.shape[0]
    z = np.array([0.0, 0.0, 1.0])
    pos = np.zeros((n, 21, 3))
    for f in Finger:
        chain = finger_chain(f)
        mcp = np.array(_MCP[f])
        d = mcp / np.linalg.norm(mcp)
        side = np.cross(z, d)
        alpha = np.radians(abd * _SPREAD[f])[:, None]
        a = np.cos(alpha) * d + np.sin(alpha) * side  # (n, 3), in the palm plane
        cumulative = np.radians(np.cumsum(flex, axis=1))  # (n, 3)
        pos[:, chain[1]] = mcp
        prev = pos[:, chain[1]]
        for k, length in enumerate(_SEGMENTS[f]):
            c = cumulative[:, k : k + 1]
            u = np.cos(c) * a - np.sin(c) * z
            pos[:, chain[k + 2]] = prev + length * u
            prev = pos[:, chain[k + 2]]
    return pos


def generate_synthetic(params: SynthParams = SynthParams()) -> SkeletonSequence:
    pos = _hand_positions(params)
    if params.handedness == Handedness.LEFT.value:
        pos[..., 0] *= -1.0
    cam = _CAMERA_ROTATION.apply(pos.reshape(-1, 3)).reshape(pos.shape) + _CAMERA_OFFSET
    if params.noise_sigma > 0:
        rng = np.random.default_rng(params.seed)
        sd = np.radians(params.noise_sigma) * NOISE_LEVER_MM
        cam = cam + rng.normal(0.0, sd, size=cam.shape)
    times = np.arange(params.n_frames) / params.frame_rate
    return SkeletonSequence(cam, times, params.handedness, params.frame_rate, f"synth-{params.seed}")


def cycle_landmarks(params: SynthParams) -> list[tuple[int, int]]:
    """Generator-truth cycle bounds, one (start, end) pair per pulse. Ends are
    pulled one frame in so that consecutive pairs do not share a frame."""
    F = params.frames_per_cycle
    return [(c * F, (c + 1) * F - 1) for c in range(params.n_cycles)]


def write_synthetic_dataset(root, groups, sequences_per_group: int = 3, seed: int = 0):
    """
    Write one synthetic sequence file per (group, repetition) plus a
    ``manifest.yaml`` under ``root`` and return the manifest path.

    ``groups`` maps a label (control, patient, orthosis) to the SynthParams
    used for that group; each repetition gets its own noise seed. Patient and
    orthosis sequences share the same patient subjects.
    """
    from dataclasses import replace
    from pathlib import Path

    from .dataset import DatasetManifest, SequenceEntry, Subject, dump_manifest, write_sequence

    root = Path(root)
    (root / "sequences").mkdir(parents=True, exist_ok=True)
    subjects = {}
    entries = []
    for g, (label, params) in enumerate(groups.items()):
        group = "control" if label == "control" else "patient"
        for k in range(sequences_per_group):
            sid = f"{'C' if group == 'control' else 'P'}{k + 1:02d}"
            subjects.setdefault(sid, Subject(sid, group))
            p = replace(params, seed=seed + 1000 * g + k)
            rel = f"sequences/{label}_{k + 1:02d}.csv"
            write_sequence(generate_synthetic(p), root / rel)
            entries.append(
                SequenceEntry(rel, sid, p.handedness, "flexion", label == "orthosis", p.frame_rate)
            )
    manifest = DatasetManifest(list(subjects.values()), entries, root)
    path = root / "manifest.yaml"
    path.write_text(dump_manifest(manifest), encoding="utf-8")
    return path
