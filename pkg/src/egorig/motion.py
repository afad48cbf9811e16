"""Motion sequences: CSV I/O, concatenation with slerp bridges, resampling
and per-joint movement statistics."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kinematics import (
    JointPose,
    RigidTransform,
    ShapeError,
    Skeleton,
    ensure_rotation,
    forward_kinematics_arrays,
    rotation_from_6d,
    rotation_to_6d,
    slerp_matrix,
)


class MotionParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class IncompatibleMotionError(ValueError):
    pass


class InsufficientFramesError(ValueError):
    pass


@dataclass(frozen=True)
class MotionSequence:
    skeleton: Skeleton
    fps: float
    root_rotations: np.ndarray  # (F, 3, 3)
    root_translations: np.ndarray  # (F, 3)
    local_rotations: np.ndarray  # (F, J, 3, 3)
    label: str | None = None

    def __post_init__(self):
        if not (self.fps > 0 and math.isfinite(self.fps)):
            raise ValueError(f"fps must be positive, got {self.fps}")
        root_r = ensure_rotation(self.root_rotations).copy()
        root_t = np.array(self.root_translations, dtype=float)
        local = ensure_rotation(self.local_rotations).copy()
        nf = root_r.shape[0] if root_r.ndim == 3 else 0
        if nf < 1:
            raise ShapeError("motion needs at least one frame")
        if root_t.shape != (nf, 3):
            raise ShapeError(f"root translations shape {root_t.shape}, expected ({nf}, 3)")
        if local.shape != (nf, self.skeleton.num_joints, 3, 3):
            raise ShapeError(
                f"local rotations shape {local.shape} does not match "
                f"{nf} frames x {self.skeleton.num_joints} joints"
            )
        for a in (root_r, root_t, local):
            a.setflags(write=False)
        object.__setattr__(self, "fps", float(self.fps))
        object.__setattr__(self, "root_rotations", root_r)
        object.__setattr__(self, "root_translations", root_t)
        object.__setattr__(self, "local_rotations", local)

    def __len__(self) -> int:
        return self.root_rotations.shape[0]

    @property
    def num_frames(self) -> int:
        return len(self)

    @property
    def duration(self) -> float:
        return (len(self) - 1) / self.fps

    @property
    def timestamps(self) -> np.ndarray:
        return np.arange(len(self)) / self.fps

    def frame(self, i: int) -> JointPose:
        return JointPose(self.local_rotations[i], RigidTransform(self.root_rotations[i], self.root_translations[i]))

    @property
    def frames(self) -> list[JointPose]:
        return [self.frame(i) for i in range(len(self))]

    @classmethod
    def from_frames(cls, skeleton: Skeleton, fps: float, frames, label=None) -> "MotionSequence":
        frames = list(frames)
        return cls(
            skeleton,
            fps,
            np.stack([f.root.rotation for f in frames]),
            np.stack([f.root.translation for f in frames]),
            np.stack([f.local_rotations for f in frames]),
            label,
        )

    def global_pose(self):
        """FK over all frames: global rotations (F, J, 3, 3) and positions (F, J, 3)."""
        return forward_kinematics_arrays(
            self.skeleton, self.local_rotations, self.root_rotations, self.root_translations
        )

    def translated(self, offset) -> "MotionSequence":
        return MotionSequence(
            self.skeleton,
            self.fps,
            self.root_rotations,
            self.root_translations + np.asarray(offset, dtype=float),
            self.local_rotations,
            self.label,
        )


# ---------------------------------------------------------------------------
# CSV


def _columns(skel: Skeleton) -> list[str]:
    cols = ["root_tx", "root_ty", "root_tz"] + [f"root_r6[{k}]" for k in range(6)]
    for name in skel.names:
        cols += [f"{name}_r6[{k}]" for k in range(6)]
    return cols


def format_motion_csv(seq: MotionSequence) -> str:
    buf = io.StringIO()
    buf.write(f"fps={seq.fps!r}\n")
    buf.write(",".join(_columns(seq.skeleton)) + "\n")
    root6 = rotation_to_6d(seq.root_rotations)
    local6 = rotation_to_6d(seq.local_rotations).reshape(len(seq), -1)
    rows = np.concatenate([seq.root_translations, root6, local6], axis=1)
    for row in rows:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def parse_motion_csv(text: str, skel: Skeleton, label: str | None = None) -> MotionSequence:
    """Parse the motion CSV format.

    Line 1 is ``fps=<f>``, line 2 the column header, then one row per frame.
    Joint column groups may appear in any order but must cover exactly the
    skeleton's joints.
    """
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MotionParseError("empty motion file", 1)
    head = lines[0].strip()
    if not head.startswith("fps="):
        raise MotionParseError("first line must be 'fps=<value>'", 1)
    try:
        fps = float(head[4:])
    except ValueError:
        raise MotionParseError(f"invalid fps value {head[4:]!r}", 1) from None
    if not (fps > 0 and math.isfinite(fps)):
        raise MotionParseError(f"fps must be positive, got {fps}", 1)
    if len(lines) < 2:
        raise MotionParseError("missing column header", 2)

    header = [h.strip() for h in lines[1].split(",")]
    root_cols = ["root_tx", "root_ty", "root_tz"] + [f"root_r6[{k}]" for k in range(6)]
    index = {name: i for i, name in enumerate(header)}
    if len(index) != len(header):
        raise MotionParseError("duplicate column names in header", 2)
    known = set(_columns(skel))
    for c in header:
        if c not in known:
            joint = c.split("_r6[", 1)[0]
            raise MotionParseError(f"unknown joint or column {joint!r}", 2)
    for c in _columns(skel):
        if c not in index:
            raise MotionParseError(f"missing column {c!r}", 2)

    order = [index[c] for c in _columns(skel)]
    rows = []
    for lineno, raw in enumerate(lines[2:], start=3):
        if not raw.strip():
            raise MotionParseError("blank line inside data", lineno)
        fields = raw.split(",")
        if len(fields) != len(header):
            raise MotionParseError(
                f"row {lineno - 2} has {len(fields)} columns, expected {len(header)}", lineno
            )
        try:
            vals = np.array([float(f) for f in fields])
        except ValueError as exc:
            raise MotionParseError(f"row {lineno - 2}: {exc}", lineno) from None
        if not np.all(np.isfinite(vals)):
            raise MotionParseError(f"row {lineno - 2}: non-finite value", lineno)
        rows.append(vals[order])
    if not rows:
        raise MotionParseError("motion file has no frames", len(lines) + 1)

    data = np.stack(rows)
    nj = skel.num_joints
    try:
        root_r = rotation_from_6d(data[:, 3:9])
        local = rotation_from_6d(data[:, 9:].reshape(-1, nj, 6))
    except ValueError as exc:
        raise MotionParseError(f"invalid 6D rotation: {exc}") from None
    return MotionSequence(skel, fps, root_r, data[:, :3], local, label)


def load_motion(path, skel: Skeleton) -> MotionSequence:
    path = Path(path)
    return parse_motion_csv(path.read_text(encoding="utf-8"), skel, label=path.stem)


def save_motion(path, seq: MotionSequence) -> None:
    Path(path).write_text(format_motion_csv(seq), encoding="utf-8")


# ---------------------------------------------------------------------------
# concatenation / resampling


def _interp_frame(seq: MotionSequence, i: int, j: int, u: float):
    """Blend frames i and j: slerped rotations, linear root translation."""
    rr = slerp_matrix(seq.root_rotations[i], seq.root_rotations[j], u)
    rt = (1.0 - u) * seq.root_translations[i] + u * seq.root_translations[j]
    lr = slerp_matrix(seq.local_rotations[i], seq.local_rotations[j], u)
    return rr, rt, lr


def concatenate(a: MotionSequence, b: MotionSequence, bridge_frames: int = 10) -> MotionSequence:
    """Append ``b`` to ``a`` with ``bridge_frames`` slerped transition frames.

    ``b`` is shifted (position only) so that its first root position matches
    ``a``'s last one. Bridge frame ``k`` (1-based) blends at ``k / (n + 1)``.
    """
    if a.skeleton is not b.skeleton and not _same_skeleton(a.skeleton, b.skeleton):
        raise IncompatibleMotionError("motions use different skeletons")
    if a.fps != b.fps:
        raise IncompatibleMotionError(f"fps mismatch: {a.fps} vs {b.fps}")
    if bridge_frames < 0:
        raise ValueError("bridge_frames must be >= 0")
    shift = a.root_translations[-1] - b.root_translations[0]
    b_root_t = b.root_translations + shift

    ra0, rb0 = a.root_rotations[-1], b.root_rotations[0]
    la0, lb0 = a.local_rotations[-1], b.local_rotations[0]
    ta0, tb0 = a.root_translations[-1], b_root_t[0]
    br, bt, bl = [], [], []
    for k in range(1, bridge_frames + 1):
        u = k / (bridge_frames + 1)
        br.append(slerp_matrix(ra0, rb0, u))
        bt.append((1.0 - u) * ta0 + u * tb0)
        bl.append(slerp_matrix(la0, lb0, u))
    nj = a.skeleton.num_joints
    return MotionSequence(
        a.skeleton,
        a.fps,
        np.concatenate([a.root_rotations, np.reshape(br, (-1, 3, 3)), b.root_rotations]),
        np.concatenate([a.root_translations, np.reshape(bt, (-1, 3)), b_root_t]),
        np.concatenate([a.local_rotations, np.reshape(bl, (-1, nj, 3, 3)), b.local_rotations]),
        a.label,
    )


def _same_skeleton(s1: Skeleton, s2: Skeleton) -> bool:
    return (
        s1.names == s2.names
        and s1.parents == s2.parents
        and np.array_equal(s1.offsets, s2.offsets)
        and np.array_equal(s1.scales, s2.scales)
    )


def resample(seq: MotionSequence, target_fps: float) -> MotionSequence:
    """Resample onto timestamps ``k / target_fps`` covering the clip duration."""
    if not target_fps > 0:
        raise ValueError("target_fps must be positive")
    if target_fps == seq.fps:
        return seq
    n_src = len(seq)
    # tolerate rounding so the final source frame is kept when it lands on the grid
    n_out = int(math.floor(seq.duration * target_fps + 1e-9)) + 1
    root_r = np.empty((n_out, 3, 3))
    root_t = np.empty((n_out, 3))
    local = np.empty((n_out,) + seq.local_rotations.shape[1:])
    for k in range(n_out):
        pos = k * seq.fps / target_fps
        i = int(math.floor(pos + 1e-9))
        u = pos - i
        if abs(u) < 1e-9 or i >= n_src - 1:
            i = min(i, n_src - 1)
            root_r[k], root_t[k], local[k] = seq.root_rotations[i], seq.root_translations[i], seq.local_rotations[i]
        else:
            root_r[k], root_t[k], local[k] = _interp_frame(seq, i, i + 1, u)
    return MotionSequence(seq.skeleton, target_fps, root_r, root_t, local, seq.label)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class JointStats:
    names: tuple[str, ...]
    mean_velocity: np.ndarray
    std_velocity: np.ndarray
    mean_acceleration: np.ndarray
    std_acceleration: np.ndarray
    mean_jerk: np.ndarray
    std_jerk: np.ndarray

    def row(self, name: str) -> dict[str, float]:
        j = self.names.index(name)
        return {
            "mean_velocity": float(self.mean_velocity[j]),
            "std_velocity": float(self.std_velocity[j]),
            "mean_acceleration": float(self.mean_acceleration[j]),
            "std_acceleration": float(self.std_acceleration[j]),
            "mean_jerk": float(self.mean_jerk[j]),
            "std_jerk": float(self.std_jerk[j]),
        }

    def to_csv(self) -> str:
        lines = ["joint,mean_velocity,std_velocity,mean_acceleration,std_acceleration,mean_jerk,std_jerk"]
        for j, name in enumerate(self.names):
            vals = (
                self.mean_velocity[j], self.std_velocity[j],
                self.mean_acceleration[j], self.std_acceleration[j],
                self.mean_jerk[j], self.std_jerk[j],
            )
            lines.append(name + "," + ",".join(repr(float(v)) for v in vals))
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        width = max(len("joint"), *(len(n) for n in self.names))
        lines = [
            f"{'joint':<{width}}  {'velocity (m/s)':>20}  {'acceleration (m/s^2)':>22}  {'jerk (m/s^3)':>22}"
        ]
        for j, name in enumerate(self.names):
            lines.append(
                f"{name:<{width}}  "
                f"{self.mean_velocity[j]:>9.4f} ± {self.std_velocity[j]:<8.4f}  "
                f"{self.mean_acceleration[j]:>10.4f} ± {self.std_acceleration[j]:<9.4f}  "
                f"{self.mean_jerk[j]:>10.3f} ± {self.std_jerk[j]:<9.3f}"
            )
        return "\n".join(lines)


def finite_differences(positions, fps: float):
    """Interior velocity, acceleration and jerk of (F, ..., 3) positions.

    Velocity and acceleration use 3-point central stencils on frames
    ``1 .. F-2``; jerk uses the 4-point central stencil on the half-frame grid
    (``k + 1.5``), which is the narrowest centred third difference. Boundary
    frames are dropped.
    """
    p = np.asarray(positions, dtype=float)
    if p.shape[0] < 4:
        raise InsufficientFramesError(f"need at least 4 frames, got {p.shape[0]}")
    vel = (p[2:] - p[:-2]) * (0.5 * fps)
    # grouped as differences so constant input gives exact zeros
    acc = ((p[2:] - p[1:-1]) - (p[1:-1] - p[:-2])) * fps**2
    jerk = ((p[3:] - p[:-3]) - 3.0 * (p[2:-1] - p[1:-2])) * fps**3
    return vel, acc, jerk


def joint_statistics(seq: MotionSequence, skel: Skeleton | None = None) -> JointStats:
    skel = skel or seq.skeleton
    if len(seq) < 4:
        raise InsufficientFramesError(f"need at least 4 frames, got {len(seq)}")
    _, pos = forward_kinematics_arrays(skel, seq.local_rotations, seq.root_rotations, seq.root_translations)
    vel, acc, jerk = (np.linalg.norm(d, axis=-1) for d in finite_differences(pos, seq.fps))
    return JointStats(
        names=skel.names,
        mean_velocity=vel.mean(axis=0),
        std_velocity=vel.std(axis=0),
        mean_acceleration=acc.mean(axis=0),
        std_acceleration=acc.std(axis=0),
        mean_jerk=jerk.mean(axis=0),
        std_jerk=jerk.std(axis=0),
    )
