"""
Canonical 21-joint hand skeleton.

Index layout: 0 is the wrist; finger f (1 = thumb .. 5 = pinky) owns the four
indices 1 + 4(f-1) .. 4 + 4(f-1), ordered proximal to distal. The thumb shares
the four-slot layout of the long fingers: its CMC, MCP and IP joints sit in the
MCP, PIP and DIP slots.

Coordinates are millimetres in sensor camera space. Handedness is carried as
metadata only.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

N_JOINTS = 21
EPS = 1e-9  # mm; vectors at or below this norm are degenerate
DEFAULT_FRAME_RATE = 30.0


class Finger(enum.IntEnum):
    I = 1    # thumb
    II = 2   # index
    III = 3  # middle
    IV = 4   # ring
    V = 5    # pinky

    @classmethod
    def parse(cls, value) -> "Finger":
        if isinstance(value, Finger):
            return value
        if isinstance(value, str):
            key = value.strip().upper()
            if key in cls.__members__:
                return cls[key]
            if key.isdigit():
                value = int(key)
        try:
            return cls(int(value))
        except (TypeError, ValueError):
            raise ValueError(f"unknown finger {value!r}; use I..V or 1..5") from None


class Slot(enum.IntEnum):
    MCP = 0
    PIP = 1
    DIP = 2
    TIP = 3


_THUMB_SLOT_NAMES = {Slot.MCP: "CMC", Slot.PIP: "MCP", Slot.DIP: "IP", Slot.TIP: "TIP"}


class Handedness(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class JointId:
    """A joint of the hand. ``finger is None`` means the wrist."""

    finger: Optional[Finger] = None
    slot: Optional[Slot] = None

    def __post_init__(self):
        if (self.finger is None) != (self.slot is None):
            raise ValueError("finger and slot must both be set, or both be None for the wrist")
        if self.finger is not None:
            object.__setattr__(self, "finger", Finger(self.finger))
            object.__setattr__(self, "slot", Slot(self.slot))

    @property
    def index(self) -> int:
        if self.finger is None:
            return 0
        return 1 + 4 * (int(self.finger) - 1) + int(self.slot)

    @property
    def name(self) -> str:
        if self.finger is None:
            return "WRIST"
        if self.finger is Finger.I:
            return f"I_{_THUMB_SLOT_NAMES[self.slot]}"
        return f"{self.finger.name}_{self.slot.name}"

    @classmethod
    def from_index(cls, index: int) -> "JointId":
        index = int(index)
        if not 0 <= index < N_JOINTS:
            raise IndexError(f"joint index {index} outside 0..{N_JOINTS - 1}")
        if index == 0:
            return WRIST
        f, s = divmod(index - 1, 4)
        return cls(Finger(f + 1), Slot(s))

    @classmethod
    def from_name(cls, name: str) -> "JointId":
        try:
            return _BY_NAME[name]
        except KeyError:
            raise ValueError(f"unknown joint name {name!r}") from None

    def __str__(self):
        return self.name


WRIST = JointId()
JOINTS = tuple(JointId.from_index(i) for i in range(N_JOINTS))
JOINT_NAMES = tuple(j.name for j in JOINTS)
_BY_NAME = {j.name: j for j in JOINTS}


def finger_chain(finger) -> tuple[int, int, int, int, int]:
    """Canonical indices W, MCP, PIP, DIP, TIP for one finger."""
    base = 1 + 4 * (int(Finger.parse(finger)) - 1)
    return (0, base, base + 1, base + 2, base + 3)


# (parent, child) index pairs for every bone in the skeleton
BONES = tuple(
    (chain[k], chain[k + 1]) for f in Finger for chain in [finger_chain(f)] for k in range(4)
)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HandSkeletonFrame:
    joints: np.ndarray  # (21, 3), mm
    timestamp: Optional[float] = None

    def __post_init__(self):
        j = np.array(self.joints, dtype=float)
        if j.shape != (N_JOINTS, 3):
            raise ValueError(f"expected joints of shape (21, 3), got {j.shape}")
        object.__setattr__(self, "joints", _readonly(j))
        if self.timestamp is not None:
            object.__setattr__(self, "timestamp", float(self.timestamp))

    def __getitem__(self, key) -> np.ndarray:
        return joint(self, key)


def joint(frame: HandSkeletonFrame, id) -> np.ndarray:
    """Position of a joint, addressed by JointId, canonical index or name."""
    if isinstance(id, JointId):
        idx = id.index
    elif isinstance(id, str):
        idx = JointId.from_name(id).index
    else:
        idx = JointId.from_index(id).index
    return frame.joints[idx]


@dataclass(frozen=True, eq=False)
class SkeletonSequence:
    """
    An ordered recording of hand skeletons.

    Positions are stored as one ``(n_frames, 21, 3)`` array; ``frames`` gives
    per-frame views. ``timestamps`` is either None or an array of length
    ``n_frames``.
    """

    positions: np.ndarray
    timestamps: Optional[np.ndarray] = None
    handedness: Handedness = Handedness.RIGHT
    frame_rate: float = DEFAULT_FRAME_RATE
    sequence_id: str = field(default="", compare=False)

    def __post_init__(self):
        p = np.array(self.positions, dtype=float)
        if p.size == 0:
            p = p.reshape(0, N_JOINTS, 3)
        if p.ndim != 3 or p.shape[1:] != (N_JOINTS, 3):
            raise ValueError(f"expected positions of shape (n, 21, 3), got {p.shape}")
        object.__setattr__(self, "positions", _readonly(p))
        if self.timestamps is not None:
            t = np.array(self.timestamps, dtype=float).reshape(-1)
            if t.shape[0] != p.shape[0]:
                raise ValueError("timestamps length differs from frame count")
            object.__setattr__(self, "timestamps", _readonly(t))
        object.__setattr__(self, "handedness", Handedness(self.handedness))
        rate = float(self.frame_rate)
        if not (np.isfinite(rate) and rate > 0):
            raise ValueError(f"frame_rate must be positive, got {self.frame_rate!r}")
        object.__setattr__(self, "frame_rate", rate)

    @classmethod
    def from_frames(cls, frames: Iterable[HandSkeletonFrame], **kwargs) -> "SkeletonSequence":
        frames = list(frames)
        positions = np.array([f.joints for f in frames], dtype=float).reshape(-1, N_JOINTS, 3)
        stamps = [f.timestamp for f in frames]
        timestamps = None
        if frames and all(s is not None for s in stamps):
            timestamps = np.array(stamps, dtype=float)
        elif any(s is not None for s in stamps):
            raise ValueError("timestamps must be given for every frame or for none")
        return cls(positions, timestamps, **kwargs)

    def __len__(self):
        return self.positions.shape[0]

    def __getitem__(self, i: int) -> HandSkeletonFrame:
        ts = None if self.timestamps is None else self.timestamps[i]
        return HandSkeletonFrame(self.positions[i], ts)

    @property
    def frames(self) -> list[HandSkeletonFrame]:
        return [self[i] for i in range(len(self))]

    def equal_coordinates(self, other: "SkeletonSequence") -> bool:
        """Bit-exact comparison of coordinates and timestamps (NaN == NaN)."""
        if self.positions.shape != other.positions.shape:
            return False
        if (self.timestamps is None) != (other.timestamps is None):
            return False
        same = np.array_equal(self.positions.view(np.uint64), other.positions.view(np.uint64))
        if self.timestamps is not None:
            same = same and np.array_equal(
                self.timestamps.view(np.uint64), other.timestamps.view(np.uint64)
            )
        return same


@dataclass(frozen=True)
class Finding:
    kind: str  # empty-sequence | non-finite | non-monotone-timestamp | zero-length-bone
    frame: Optional[int]
    detail: str = ""

    def __str__(self):
        where = "-" if self.frame is None else f"frame {self.frame}"
        return f"{self.kind} at {where}: {self.detail}" if self.detail else f"{self.kind} at {where}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def __bool__(self):
        return self.ok

    def __iter__(self):
        return iter(self.findings)

    def __len__(self):
        return len(self.findings)

    def frames_with(self, kind: str) -> list[int]:
        return [f.frame for f in self.findings if f.kind == kind]


def validate(seq: SkeletonSequence) -> ValidationReport:
    """Collect every structural problem in a sequence; never raises."""
    report = ValidationReport()
    n = len(seq)
    if n == 0:
        report.findings.append(Finding("empty-sequence", None))
        return report

    p = seq.positions
    bad = ~np.isfinite(p).all(axis=(1, 2))
    for i in np.flatnonzero(bad):
        cols = [JOINT_NAMES[j] for j in np.flatnonzero(~np.isfinite(p[i]).all(axis=1))]
        report.findings.append(Finding("non-finite", int(i), ",".join(cols)))

    if seq.timestamps is not None:
        t = seq.timestamps
        for i in np.flatnonzero(~np.isfinite(t)):
            report.findings.append(Finding("non-monotone-timestamp", int(i), "non-finite timestamp"))
        for i in np.flatnonzero(np.diff(t) <= 0):
            report.findings.append(
                Finding("non-monotone-timestamp", int(i) + 1, f"{t[i + 1]!r} after {t[i]!r}")
            )

    parents = np.array([b[0] for b in BONES])
    children = np.array([b[1] for b in BONES])
    with np.errstate(invalid="ignore"):
        lengths = np.linalg.norm(p[:, children] - p[:, parents], axis=-1)
        short = lengths <= EPS
    for i, b in zip(*np.nonzero(short)):
        report.findings.append(
            Finding(
                "zero-length-bone",
                int(i),
                f"{JOINT_NAMES[parents[b]]}-{JOINT_NAMES[children[b]]}",
            )
        )
    report.findings.sort(key=lambda f: (f.frame if f.frame is not None else -1))
    return report
