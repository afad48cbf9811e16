"""Analytic scene primitives and vectorized ray intersection.

Every ``intersect`` returns ``(t, normal)`` for rays ``origin + t * d``:
``t`` has shape (N,) with ``inf`` for misses and ``normal`` (N, 3) is the
outward surface normal in world coordinates. Only hits with ``t >= t_min``
count; when a ray starts inside a solid the exit point is reported.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..kinematics import ensure_rotation

BODY_SEMANTIC_ID = 255


def _vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    a.setflags(write=False)
    return a


def _check_id(semantic_id) -> None:
    # 0 is reserved for background; labels are written as 8-bit grey values
    if not 1 <= int(semantic_id) <= 255:
        raise ValueError(f"semantic id must lie in 1..255, got {semantic_id}")


def _nearest_root(a, b, c, t_min):
    """Smallest root >= t_min of a t^2 + b t + c = 0 (a > 0), else inf."""
    disc = b * b - 4.0 * a * c
    hit = disc >= 0.0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t0 = (-b - sq) / (2.0 * a)
    t1 = (-b + sq) / (2.0 * a)
    t = np.where(t0 >= t_min, t0, np.where(t1 >= t_min, t1, np.inf))
    return np.where(hit, t, np.inf)


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    semantic_id: int = 1

    def __post_init__(self):
        _check_id(self.semantic_id)
        object.__setattr__(self, "center", _vec(self.center))
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")

    def bounding_sphere(self):
        return self.center, self.radius

    def intersect(self, origin, dirs, t_min=0.0):
        oc = origin - self.center
        a = np.einsum("ij,ij->i", dirs, dirs)
        b = 2.0 * (dirs @ oc)
        c = float(oc @ oc) - self.radius**2
        t = _nearest_root(a, b, c, t_min)
        hit = np.isfinite(t)
        p = origin + np.where(hit, t, 0.0)[:, None] * dirs
        n = (p - self.center) / self.radius
        return t, n


@dataclass(frozen=True)
class Plane:
    point: np.ndarray
    normal: np.ndarray
    semantic_id: int = 1

    def __post_init__(self):
        _check_id(self.semantic_id)
        n = np.asarray(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("plane normal must be unit length")
        object.__setattr__(self, "point", _vec(self.point))
        object.__setattr__(self, "normal", _vec(n))

    def bounding_sphere(self):
        return None

    def intersect(self, origin, dirs, t_min=0.0):
        denom = dirs @ self.normal
        num = float((self.point - origin) @ self.normal)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / denom
        t = np.where((np.abs(denom) > 1e-15) & (t >= t_min), t, np.inf)
        return t, np.broadcast_to(self.normal, dirs.shape)


@dataclass(frozen=True)
class Capsule:
    p0: np.ndarray
    p1: np.ndarray
    radius: float
    semantic_id: int = 1

    def __post_init__(self):
        _check_id(self.semantic_id)
        object.__setattr__(self, "p0", _vec(self.p0))
        object.__setattr__(self, "p1", _vec(self.p1))
        if not self.radius > 0:
            raise ValueError("capsule radius must be positive")

    def bounding_sphere(self):
        return 0.5 * (self.p0 + self.p1), 0.5 * float(np.linalg.norm(self.p1 - self.p0)) + self.radius

    def intersect(self, origin, dirs, t_min=0.0):
        axis = self.p1 - self.p0
        length = float(np.linalg.norm(axis))
        caps = [Sphere(self.p0, self.radius), Sphere(self.p1, self.radius)]
        t_best = np.full(dirs.shape[0], np.inf)
        n_best = np.zeros(dirs.shape)
        for cap in caps:
            t, n = cap.intersect(origin, dirs, t_min)
            better = t < t_best
            t_best = np.where(better, t, t_best)
            n_best = np.where(better[:, None], n, n_best)
        if length < 1e-12:
            return t_best, n_best
        w = axis / length
        oc = origin - self.p0
        d_perp = dirs - np.outer(dirs @ w, w)
        o_perp = oc - (oc @ w) * w
        a = np.einsum("ij,ij->i", d_perp, d_perp)
        b = 2.0 * (d_perp @ o_perp)
        c = float(o_perp @ o_perp) - self.radius**2
        ok = a > 1e-18
        a_safe = np.where(ok, a, 1.0)
        disc = b * b - 4.0 * a_safe * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        for sign in (-1.0, 1.0):
            t = (-b + sign * sq) / (2.0 * a_safe)
            s = (oc @ w) + t * (dirs @ w)
            valid = ok & (disc >= 0.0) & (t >= t_min) & (s >= 0.0) & (s <= length)
            t = np.where(valid, t, np.inf)
            better = t < t_best
            p = origin + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs
            rel = p - self.p0
            n = rel - np.outer(rel @ w, w)
            n /= self.radius
            t_best = np.where(better, t, t_best)
            n_best = np.where(better[:, None], n, n_best)
        return t_best, n_best


@dataclass(frozen=True)
class Box:
    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    semantic_id: int = 1

    def __post_init__(self):
        _check_id(self.semantic_id)
        object.__setattr__(self, "center", _vec(self.center))
        he = _vec(self.half_extents)
        if np.any(he <= 0):
            raise ValueError("box half extents must be positive")
        object.__setattr__(self, "half_extents", he)
        rot = ensure_rotation(self.rotation).copy()
        rot.setflags(write=False)
        object.__setattr__(self, "rotation", rot)

    def bounding_sphere(self):
        return self.center, float(np.linalg.norm(self.half_extents))

    def intersect(self, origin, dirs, t_min=0.0):
        o = (origin - self.center) @ self.rotation
        d = dirs @ self.rotation
        he = self.half_extents
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            ta = (-he - o) * inv
            tb = (he - o) * inv
        # rays parallel to a slab: inside -> unbounded, outside -> miss
        par = d == 0.0
        inside = np.abs(o) <= he
        ta = np.where(par, np.where(inside, -np.inf, np.inf), ta)
        tb = np.where(par, np.where(inside, np.inf, -np.inf), tb)
        tlo = np.minimum(ta, tb)
        thi = np.maximum(ta, tb)
        t_near = tlo.max(axis=1)
        t_far = thi.min(axis=1)
        ax_near = tlo.argmax(axis=1)
        ax_far = thi.argmin(axis=1)
        hit = t_near <= t_far
        use_near = hit & (t_near >= t_min)
        use_far = hit & ~use_near & (t_far >= t_min)
        t = np.where(use_near, t_near, np.where(use_far, t_far, np.inf))
        axis = np.where(use_near, ax_near, ax_far)
        rows = np.arange(dirs.shape[0])
        n_local = np.zeros(dirs.shape)
        p_local = o + np.where(np.isfinite(t), t, 0.0)[:, None] * d
        n_local[rows, axis] = np.sign(p_local[rows, axis])
        n_local[rows, axis] = np.where(n_local[rows, axis] == 0.0, 1.0, n_local[rows, axis])
        return t, n_local @ self.rotation.T


Primitive = Sphere | Capsule | Box | Plane


def candidate_rays(prim, origin, dirs, dir_sq, t_min, t_max):
    """Mask of rays that may hit ``prim`` closer than ``t_max``.

    Conservative test against the primitive's bounding sphere; ``None``
    means every ray is a candidate.
    """
    bound = prim.bounding_sphere()
    if bound is None:
        return None
    center, radius = bound
    oc = np.asarray(center) - origin
    proj = dirs @ oc  # |d| * distance along the ray to the closest approach
    dist_sq = float(oc @ oc) - proj * proj / dir_sq
    r2 = radius * radius
    mask = dist_sq <= r2 * (1.0 + 1e-9)
    # far end of the bounding sphere must lie beyond the near clip, near end before t_max
    half = np.sqrt(np.maximum(r2 - dist_sq, 0.0) / dir_sq)
    t_mid = proj / dir_sq
    mask &= (t_mid + half >= t_min) & (t_mid - half <= t_max)
    return mask


def body_capsules(skeleton, joint_positions, radius: float = 0.05, semantic_id: int = BODY_SEMANTIC_ID) -> list[Capsule]:
    """One capsule per bone (parent joint to child joint) for a single frame."""
    caps = []
    for j, p in enumerate(skeleton.parents):
        if p < 0:
            continue
        if np.linalg.norm(joint_positions[j] - joint_positions[p]) < 1e-9:
            continue
        caps.append(Capsule(joint_positions[p], joint_positions[j], radius, semantic_id))
    return caps
