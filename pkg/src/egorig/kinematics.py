"""Rotation algebra, forward kinematics and root-pose accumulation.

Conventions used throughout the package:

* rotations are 3x3 matrices acting on column vectors,
* a :class:`RigidTransform` maps child-frame coordinates into parent-frame
  coordinates (``p_parent = R @ p_child + t``),
* quaternions are ``(w, x, y, z)`` and only appear at the slerp boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ORTHO_TOL = 1e-6
DEGENERATE_6D_TOL = 1e-8


class InvalidRotationError(ValueError):
    pass


class Degenerate6DError(ValueError):
    pass


class InvalidQuaternionError(ValueError):
    pass


class ShapeError(ValueError):
    pass


class SkeletonError(ValueError):
    pass


# ---------------------------------------------------------------------------
# SO(3) helpers


def polar_orthonormalize(r: np.ndarray) -> np.ndarray:
    """Closest rotation to ``r`` (polar factor via SVD), batched over leading axes."""
    u, _, vt = np.linalg.svd(r)
    d = np.sign(np.linalg.det(u @ vt))
    u = u.copy()
    u[..., :, 2] *= d[..., None]
    return u @ vt


def ensure_rotation(r, tol: float = ORTHO_TOL) -> np.ndarray:
    """Validate ``r`` (shape ``(..., 3, 3)``) and snap it onto SO(3).

    Inputs within ``tol`` (Frobenius norm of ``R^T R - I``) are renormalized by
    polar decomposition; anything further away, or with negative determinant,
    raises :class:`InvalidRotationError`.
    """
    r = np.asarray(r, dtype=float)
    if r.shape[-2:] != (3, 3):
        raise ShapeError(f"expected (..., 3, 3) rotation, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise InvalidRotationError("rotation contains non-finite values")
    dev = np.linalg.norm(np.swapaxes(r, -1, -2) @ r - np.eye(3), axis=(-2, -1))
    if np.any(dev > tol):
        raise InvalidRotationError(f"matrix is not orthonormal (deviation {dev.max():.3g})")
    if np.any(np.linalg.det(r) <= 0):
        raise InvalidRotationError("matrix has negative determinant (reflection)")
    # already orthonormal to rounding: keep the input bits
    if np.all(dev <= 1e-12):
        return r
    return polar_orthonormalize(r)


def hat(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def so3_exp(w) -> np.ndarray:
    """Rodrigues formula, batched over leading axes of ``w`` (..., 3)."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w, axis=-1)[..., None, None]
    k = hat(w)
    k2 = k @ k
    small = theta < 1e-8
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    return np.eye(3) + a * k + b * k2


def so3_log(r) -> np.ndarray:
    """Rotation vector (axis * angle) of ``r``, batched; robust near 0 and pi."""
    r = np.asarray(r, dtype=float)
    flat = r.reshape(-1, 3, 3)
    out = np.empty((flat.shape[0], 3))
    for i, m in enumerate(flat):
        out[i] = _so3_log_single(m)
    return out.reshape(r.shape[:-2] + (3,))


def _so3_log_single(m: np.ndarray) -> np.ndarray:
    cos = np.clip((np.trace(m) - 1.0) * 0.5, -1.0, 1.0)
    theta = np.arccos(cos)
    v = np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])
    if theta < 1e-6:
        return 0.5 * v
    if np.pi - theta > 1e-4:
        return v * (theta / (2.0 * np.sin(theta)))
    # near pi: axis from the symmetric part
    b = (m + np.eye(3)) * 0.5
    j = int(np.argmax(np.diag(b)))
    axis = b[:, j] / np.sqrt(max(b[j, j], 1e-300))
    axis /= np.linalg.norm(axis)
    if np.dot(axis, v) < 0:
        axis = -axis
    return axis * theta


def rotation_angle(r) -> np.ndarray:
    """Geodesic angle (radians) of rotation matrices ``r``."""
    r = np.asarray(r, dtype=float)
    return np.linalg.norm(so3_log(r), axis=-1)


def axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    return so3_exp(axis / np.linalg.norm(axis) * angle)


def rot_x(angle: float) -> np.ndarray:
    return axis_angle([1.0, 0.0, 0.0], angle)


def rot_y(angle: float) -> np.ndarray:
    return axis_angle([0.0, 1.0, 0.0], angle)


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_rotations(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniformly distributed rotations via normalized Gaussian quaternions."""
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return quat_to_matrix(q)


# ---------------------------------------------------------------------------
# 6D representation


def rotation_to_6d(r) -> np.ndarray:
    """First two columns of ``r`` laid out column after column: shape (..., 6)."""
    r = ensure_rotation(r)
    return np.concatenate([r[..., :, 0], r[..., :, 1]], axis=-1)


def rotation_from_6d(v) -> np.ndarray:
    """Gram-Schmidt decode of a 6D vector (..., 6) into a rotation (..., 3, 3)."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 6:
        raise ShapeError(f"expected (..., 6) vector, got shape {v.shape}")
    a1, a2 = v[..., :3], v[..., 3:]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    n2 = np.linalg.norm(a2, axis=-1, keepdims=True)
    if np.any(n1 <= DEGENERATE_6D_TOL) or np.any(n2 <= DEGENERATE_6D_TOL):
        raise Degenerate6DError("6D rotation has a near-zero column")
    b1 = a1 / n1
    u2 = a2 - np.sum(b1 * a2, axis=-1, keepdims=True) * b1
    nu = np.linalg.norm(u2, axis=-1, keepdims=True)
    if np.any(nu <= DEGENERATE_6D_TOL * n2):
        raise Degenerate6DError("6D rotation columns are (near) parallel")
    b2 = u2 / nu
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


# ---------------------------------------------------------------------------
# quaternions


def matrix_to_quat(r) -> np.ndarray:
    """Rotation matrices to unit quaternions ``(w, x, y, z)`` with ``w >= 0``."""
    r = np.asarray(r, dtype=float)
    flat = r.reshape(-1, 3, 3)
    q = np.empty((flat.shape[0], 4))
    for i, m in enumerate(flat):
        tr = np.trace(m)
        if tr > 0:
            s = np.sqrt(tr + 1.0) * 2.0
            q[i] = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            q[i] = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        elif m[1, 1] > m[2, 2]:
            s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            q[i] = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        else:
            s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
            q[i] = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q[q[:, 0] < 0] *= -1.0
    return q.reshape(r.shape[:-2] + (4,))


def quat_to_matrix(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise InvalidQuaternionError("zero quaternion")
    w, x, y, z = np.moveaxis(q / norm, -1, 0)
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1),
        ],
        axis=-2,
    )


def slerp(qa, qb, t: float) -> np.ndarray:
    """Shortest-arc spherical linear interpolation between unit quaternions."""
    qa = np.asarray(qa, dtype=float)
    qb = np.asarray(qb, dtype=float)
    na, nb = np.linalg.norm(qa), np.linalg.norm(qb)
    if na < 1e-12 or nb < 1e-12:
        raise InvalidQuaternionError("zero quaternion")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"slerp parameter {t} outside [0, 1]")
    qa, qb = qa / na, qb / nb
    dot = float(np.dot(qa, qb))
    if dot < 0.0:
        qb, dot = -qb, -dot
    if dot > 1.0 - 1e-12:
        q = qa + t * (qb - qa)
        return q / np.linalg.norm(q)
    omega = np.arccos(min(dot, 1.0))
    s = np.sin(omega)
    return (np.sin((1.0 - t) * omega) / s) * qa + (np.sin(t * omega) / s) * qb


def slerp_matrix(ra, rb, t: float) -> np.ndarray:
    """Slerp between rotation matrices, batched over leading axes.

    Computed as ``ra @ exp(t * log(ra^T rb))`` which is the same shortest-arc
    path as quaternion slerp but avoids the matrix/quaternion round trip, so
    the endpoints are reproduced exactly.
    """
    ra = np.asarray(ra, dtype=float)
    rb = np.asarray(rb, dtype=float)
    if t == 0.0:
        return ra.copy()
    if t == 1.0:
        return rb.copy()
    delta = so3_log(np.swapaxes(ra, -1, -2) @ rb)
    return ra @ so3_exp(t * delta)


# ---------------------------------------------------------------------------
# rigid transforms


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = ensure_rotation(self.rotation).copy()
        trans = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(trans)):
            raise ValueError("translation contains non-finite values")
        rot.setflags(write=False)
        trans = trans.copy()
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_matrix(cls, m) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


def stack_transforms(poses: Iterable[RigidTransform]) -> tuple[np.ndarray, np.ndarray]:
    poses = list(poses)
    if not poses:
        return np.zeros((0, 3, 3)), np.zeros((0, 3))
    return (
        np.stack([p.rotation for p in poses]),
        np.stack([p.translation for p in poses]),
    )


def unstack_transforms(rotations, translations) -> list[RigidTransform]:
    return [RigidTransform(r, t) for r, t in zip(rotations, translations)]


def accumulate_root(
    relatives: Sequence[RigidTransform], start: RigidTransform | None = None
) -> list[RigidTransform]:
    """Chain per-frame relative root motions into global root poses.

    ``global_i = global_{i-1} @ relative_i`` with ``global_{-1} = start``.
    """
    if len(relatives) == 0:
        raise ValueError("accumulate_root needs at least one relative transform")
    current = start if start is not None else RigidTransform()
    out = []
    for rel in relatives:
        current = current @ rel
        out.append(current)
    return out


def relative_root(
    globals_: Sequence[RigidTransform], start: RigidTransform | None = None
) -> list[RigidTransform]:
    """Frame-to-frame differences; the inverse of :func:`accumulate_root`."""
    prev = start if start is not None else RigidTransform()
    out = []
    for g in globals_:
        out.append(prev.inverse() @ g)
        prev = g
    return out


def relative_root_arrays(rotations, translations, start_rotation=None, start_translation=None):
    """Array form of :func:`relative_root` for (F, 3, 3) / (F, 3) inputs."""
    rotations = np.asarray(rotations, dtype=float)
    translations = np.asarray(translations, dtype=float)
    prev_r = np.concatenate([[np.eye(3) if start_rotation is None else start_rotation], rotations[:-1]])
    prev_t = np.concatenate([[np.zeros(3) if start_translation is None else start_translation], translations[:-1]])
    prev_rt = np.swapaxes(prev_r, -1, -2)
    rel_r = prev_rt @ rotations
    rel_t = np.einsum("fij,fj->fi", prev_rt, translations - prev_t)
    return rel_r, rel_t


# ---------------------------------------------------------------------------
# skeleton and FK


@dataclass(frozen=True)
class Skeleton:
    """Joint tree in topological order; joint 0 is the root."""

    names: tuple[str, ...]
    parents: tuple[int, ...]
    offsets: np.ndarray  # (J, 3) rest offsets in the parent frame, meters
    scales: np.ndarray  # (J,) bone-length scale factors

    def __post_init__(self):
        names = tuple(self.names)
        parents = tuple(int(p) for p in self.parents)
        offsets = np.array(self.offsets, dtype=float).reshape(len(names), 3)
        scales = np.array(self.scales, dtype=float).reshape(len(names))
        if len(names) == 0:
            raise SkeletonError("skeleton has no joints")
        if len(set(names)) != len(names):
            raise SkeletonError("duplicate joint names")
        if len(parents) != len(names):
            raise SkeletonError("parents and names differ in length")
        if parents[0] != -1 or any(p == -1 for p in parents[1:]):
            raise SkeletonError("skeleton must have exactly one root at index 0")
        for j, p in enumerate(parents[1:], start=1):
            if not 0 <= p < j:
                raise SkeletonError(f"joint {names[j]!r} has parent index {p} not before itself")
        if np.any(scales <= 0) or not np.all(np.isfinite(scales)):
            raise SkeletonError("bone scales must be positive")
        offsets.setflags(write=False)
        scales.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "scales", scales)

    @property
    def num_joints(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown joint {name!r}") from None

    def children(self, j: int) -> list[int]:
        return [k for k, p in enumerate(self.parents) if p == j]

    def with_scales(self, scales) -> "Skeleton":
        return Skeleton(self.names, self.parents, self.offsets, scales)

    @classmethod
    def from_unsorted(cls, joints: Sequence[tuple[str, int, Sequence[float], float]]) -> "Skeleton":
        """Build from ``(name, parent, offset, scale)`` tuples in any order.

        Parent indices refer to positions in ``joints``; the result is
        reordered so that every parent precedes its children (stable w.r.t.
        the input order).
        """
        n = len(joints)
        roots = [i for i, j in enumerate(joints) if j[1] == -1]
        if len(roots) != 1:
            raise SkeletonError(f"expected exactly one root joint, found {len(roots)}")
        for i, j in enumerate(joints):
            if j[1] != -1 and not 0 <= j[1] < n:
                raise SkeletonError(f"joint {j[0]!r} references missing parent {j[1]}")
        order = _stable_topological(joints)
        remap = {old: new for new, old in enumerate(order)}
        return cls(
            names=[joints[i][0] for i in order],
            parents=[-1 if joints[i][1] == -1 else remap[joints[i][1]] for i in order],
            offsets=[joints[i][2] for i in order],
            scales=[joints[i][3] for i in order],
        )


def _stable_topological(joints) -> list[int]:
    n = len(joints)
    done: list[int] = []
    placed = [False] * n
    while len(done) < n:
        progressed = False
        for i, j in enumerate(joints):
            if not placed[i] and (j[1] == -1 or placed[j[1]]):
                placed[i] = True
                done.append(i)
                progressed = True
        if not progressed:
            raise SkeletonError("skeleton contains a cycle or disconnected joints")
    return done


def parse_skeleton(text: str) -> Skeleton:
    """Parse the plain-text skeleton format.

    One joint per line: ``name parent_index ox oy oz scale``. ``#`` starts a
    comment. Parent indices refer to the order of joint lines in the file.
    """
    joints = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise SkeletonError(f"line {lineno}: expected 6 fields, got {len(parts)}")
        try:
            parent = int(parts[1])
            vals = [float(x) for x in parts[2:]]
        except ValueError as exc:
            raise SkeletonError(f"line {lineno}: {exc}") from None
        if not all(np.isfinite(vals)):
            raise SkeletonError(f"line {lineno}: non-finite value")
        joints.append((parts[0], parent, vals[:3], vals[3]))
    if not joints:
        raise SkeletonError("skeleton file contains no joints")
    return Skeleton.from_unsorted(joints)


def load_skeleton(path) -> Skeleton:
    return parse_skeleton(Path(path).read_text(encoding="utf-8"))


def format_skeleton(skel: Skeleton) -> str:
    lines = ["# name parent ox oy oz scale"]
    for name, parent, off, s in zip(skel.names, skel.parents, skel.offsets, skel.scales):
        vals = " ".join(repr(float(v)) for v in (*off, s))
        lines.append(f"{name} {parent} {vals}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class JointPose:
    local_rotations: np.ndarray  # (J, 3, 3)
    root: RigidTransform = field(default_factory=RigidTransform)

    def __post_init__(self):
        rots = ensure_rotation(self.local_rotations).copy()
        if rots.ndim != 3:
            raise ShapeError("local_rotations must have shape (J, 3, 3)")
        rots.setflags(write=False)
        object.__setattr__(self, "local_rotations", rots)

    @classmethod
    def identity(cls, num_joints: int, root: RigidTransform | None = None) -> "JointPose":
        return cls(np.tile(np.eye(3), (num_joints, 1, 1)), root or RigidTransform())


def forward_kinematics_arrays(skel: Skeleton, local_rotations, root_rotations, root_translations):
    """Batched FK.

    ``local_rotations`` is (F, J, 3, 3), root arrays (F, 3, 3) and (F, 3).
    Returns global rotations (F, J, 3, 3) and joint positions (F, J, 3).
    The root transform acts as the parent of joint 0.
    """
    local = np.asarray(local_rotations, dtype=float)
    root_r = np.asarray(root_rotations, dtype=float)
    root_t = np.asarray(root_translations, dtype=float)
    if local.ndim != 4 or local.shape[1:] != (skel.num_joints, 3, 3):
        raise ShapeError(
            f"local rotations shape {local.shape} does not match skeleton with {skel.num_joints} joints"
        )
    nf = local.shape[0]
    if root_r.shape != (nf, 3, 3) or root_t.shape != (nf, 3):
        raise ShapeError("root arrays do not match frame count")
    bones = skel.offsets * skel.scales[:, None]
    g_rot = np.empty_like(local)
    g_pos = np.empty((nf, skel.num_joints, 3))
    for j, p in enumerate(skel.parents):
        pr, pt = (root_r, root_t) if p < 0 else (g_rot[:, p], g_pos[:, p])
        g_pos[:, j] = pt + np.einsum("fij,j->fi", pr, bones[j])
        g_rot[:, j] = pr @ local[:, j]
    return g_rot, g_pos


def forward_kinematics(skel: Skeleton, pose: JointPose) -> list[RigidTransform]:
    """Global transform of every joint for a single pose."""
    if pose.local_rotations.shape[0] != skel.num_joints:
        raise ShapeError(
            f"pose has {pose.local_rotations.shape[0]} joints, skeleton has {skel.num_joints}"
        )
    g_rot, g_pos = forward_kinematics_arrays(
        skel,
        pose.local_rotations[None],
        pose.root.rotation[None],
        pose.root.translation[None],
    )
    return unstack_transforms(g_rot[0], g_pos[0])
