"""
Flexion and abduction angles from a 21-joint hand skeleton.

Flexion at a joint is the angle between the two bone vectors meeting there:
0 deg for a straight finger, growing as it bends. Abduction of a finger is the
angle between its metacarpal vector (MCP - W) and the proximal phalanx
(PIP - MCP) projected onto the palm plane, the plane through W, MCP of the
index and MCP of the pinky.

All vectors are normalised before the dot product. The angle is evaluated as
``atan2(|u x v|, u . v)`` on the unit vectors, which equals the clamped
``arccos(u . v)`` but keeps full precision for nearly straight joints.
Angles are radians internally and degrees at the public surface.

The batch kernel :func:`angle_matrix` works on ``(..., 21, 3)`` arrays and
marks degenerate angles with NaN. The per-frame functions raise instead.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateBoneError,
    DegeneratePlaneError,
    DegenerateProjectionError,
    DegenerateVectorError,
)
from .skeleton import EPS, JOINT_NAMES, Finger, HandSkeletonFrame, finger_chain

FLEX_SLOTS = ("MCP", "PIP", "DIP")
FLEXION_CHANNELS = tuple(f"flex_{f.name}_{s}" for f in Finger for s in FLEX_SLOTS)
ABDUCTION_CHANNELS = tuple(f"abd_{f.name}" for f in Finger)
CHANNELS = FLEXION_CHANNELS + ABDUCTION_CHANNELS
N_CHANNELS = len(CHANNELS)

_INDEX_MCP = finger_chain(Finger.II)[1]
_PINKY_MCP = finger_chain(Finger.V)[1]
_CHAINS = np.array([finger_chain(f) for f in Finger])  # (5, 5)


def flexion_channel(finger, slot: str = "PIP") -> str:
    return f"flex_{Finger.parse(finger).name}_{slot.upper()}"


def abduction_channel(finger) -> str:
    return f"abd_{Finger.parse(finger).name}"


def finger_channels(finger) -> tuple[str, ...]:
    f = Finger.parse(finger)
    return tuple(flexion_channel(f, s) for s in FLEX_SLOTS) + (abduction_channel(f),)


# -- batch kernels ------------------------------------------------------------

def _unit(v):
    n = np.linalg.norm(v, axis=-1)
    ok = n > EPS
    with np.errstate(invalid="ignore", divide="ignore"):
        u = v / n[..., None]
    return u, ok


def _angle_rad(u, v):
    uu, oku = _unit(u)
    vv, okv = _unit(v)
    # same value as arccos(clip(uu . vv)), but well conditioned near 0 and pi
    with np.errstate(invalid="ignore"):
        s = np.linalg.norm(np.cross(uu, vv), axis=-1)
        c = np.sum(uu * vv, axis=-1)
        a = np.arctan2(s, c)
    return np.where(oku & okv, a, np.nan)


def _palm_normal(positions):
    w = positions[..., 0, :]
    n = np.cross(positions[..., _INDEX_MCP, :] - w, positions[..., _PINKY_MCP, :] - w)
    return _unit(n)


def _project(v, normal):
    return v - np.sum(v * normal, axis=-1)[..., None] * normal


def angle_matrix(positions, degrees: bool = True) -> np.ndarray:
    """
    All 20 angles for every frame.

    Parameters
    ----------
    positions : array_like, shape (..., 21, 3)
    degrees : bool
        Return degrees (default) or radians.

    Returns
    -------
    ndarray, shape (..., 20)
        Columns follow :data:`CHANNELS`: 15 flexion angles (fingers I..V,
        slots MCP, PIP, DIP) then 5 abduction angles. NaN marks an angle whose
        geometry is degenerate.
    """
    p = np.asarray(positions, dtype=float)
    # non-finite joints just propagate to NaN angles
    with np.errstate(invalid="ignore", over="ignore"):
        chain = p[..., _CHAINS, :]  # (..., 5, 5, 3)
        bones = np.diff(chain, axis=-2)  # (..., 5, 4, 3): meta, prox, mid, dist
        flex = _angle_rad(bones[..., :3, :], bones[..., 1:, :])  # (..., 5, 3)

        normal, plane_ok = _palm_normal(p)
        prox = bones[..., 1, :]
        proj = _project(prox, normal[..., None, :])
        abd = _angle_rad(bones[..., 0, :], proj)
        abd = np.where(plane_ok[..., None], abd, np.nan)

    out = np.concatenate([flex.reshape(flex.shape[:-2] + (15,)), abd], axis=-1)
    return np.degrees(out) if degrees else out


# -- per-frame operations ------------------------------------------------------

def angle_between(u, v) -> float:
    """Angle in radians, in [0, pi], between two 3-vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    for name, w in (("u", u), ("v", v)):
        if not np.linalg.norm(w) > EPS:
            raise DegenerateVectorError(f"{name} has norm <= {EPS}")
    return float(_angle_rad(u, v))


@dataclass(frozen=True)
class PalmPlane:
    normal: np.ndarray
    anchor: np.ndarray


@dataclass(frozen=True)
class FlexionAngles:
    """Degrees; None marks an angle that could not be measured."""

    mcp: Optional[float]
    pip: Optional[float]
    dip: Optional[float]

    def as_tuple(self):
        return (self.mcp, self.pip, self.dip)


def _bone_name(parent, child):
    return f"{JOINT_NAMES[parent]}->{JOINT_NAMES[child]}"


def flexion_angles(frame: HandSkeletonFrame, finger) -> FlexionAngles:
    """MCP, PIP and DIP flexion of one finger, in degrees."""
    chain = finger_chain(finger)
    j = frame.joints
    for a, b in zip(chain[:-1], chain[1:]):
        if not np.linalg.norm(j[b] - j[a]) > EPS:
            name = _bone_name(a, b)
            raise DegenerateBoneError(f"degenerate bone {name}", name)
    row = angle_matrix(j)
    f = int(Finger.parse(finger)) - 1
    return FlexionAngles(*(float(x) for x in row[3 * f : 3 * f + 3]))


def palm_plane(frame: HandSkeletonFrame) -> PalmPlane:
    normal, ok = _palm_normal(frame.joints)
    if not ok:
        raise DegeneratePlaneError("wrist, index MCP and pinky MCP are collinear or coincident")
    anchor = frame.joints[0].copy()
    normal = normal.copy()
    normal.setflags(write=False)
    anchor.setflags(write=False)
    return PalmPlane(normal, anchor)


def project_onto_plane(v, plane: PalmPlane) -> np.ndarray:
    """Component of ``v`` lying in the plane: v - (v . n) n."""
    return _project(np.asarray(v, dtype=float), plane.normal)


def abduction_angle(frame: HandSkeletonFrame, finger) -> float:
    """Unsigned abduction of one finger, in degrees."""
    plane = palm_plane(frame)
    w, mcp, pip = (frame.joints[i] for i in finger_chain(finger)[:3])
    meta = mcp - w
    proj = project_onto_plane(pip - mcp, plane)
    if not np.linalg.norm(meta) > EPS:
        raise DegenerateBoneError("degenerate metacarpal", _bone_name(0, finger_chain(finger)[1]))
    if not np.linalg.norm(proj) > EPS:
        raise DegenerateProjectionError(
            f"finger {Finger.parse(finger).name} is perpendicular to the palm plane"
        )
    f = int(Finger.parse(finger)) - 1
    return float(angle_matrix(frame.joints)[15 + f])


def abduction_sign(frame: HandSkeletonFrame, finger) -> int:
    """
    Side of the metacarpal the finger deviates to: sign of
    ((MCP - W) x P) . N, with P the projected proximal phalanx.

    This is an extension; the sign depends on handedness and on the
    orientation of N, so reports built from :func:`frame_angles` never use it.
    """
    plane = palm_plane(frame)
    w, mcp, pip = (frame.joints[i] for i in finger_chain(finger)[:3])
    proj = project_onto_plane(pip - mcp, plane)
    return int(np.sign(np.dot(np.cross(mcp - w, proj), plane.normal)))


@dataclass(frozen=True)
class AngleFrame:
    flexion: tuple[FlexionAngles, ...]  # fingers I..V
    abduction: tuple[Optional[float], ...]  # fingers I..V, degrees
    frame_index: int = 0

    def as_array(self) -> np.ndarray:
        """The 20 angles in channel order, NaN for absent entries."""
        vals = [a for fa in self.flexion for a in fa.as_tuple()] + list(self.abduction)
        return np.array([np.nan if a is None else a for a in vals], dtype=float)


def _present(x):
    return None if np.isnan(x) else float(x)


def frame_angles(frame: HandSkeletonFrame, frame_index: int = 0) -> AngleFrame:
    """All flexion and abduction angles of one frame. Degenerate entries are
    None; they never fail the frame."""
    row = angle_matrix(frame.joints)
    flex = tuple(
        FlexionAngles(*(_present(x) for x in row[3 * f : 3 * f + 3])) for f in range(5)
    )
    abd = tuple(_present(x) for x in row[15:])
    return AngleFrame(flex, abd, frame_index)
