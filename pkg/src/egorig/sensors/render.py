"""Ray-cast depth / normal / semantic frames and temporally supersampled blur."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..kinematics import RigidTransform
from .camera import CameraIntrinsics
from .scene import candidate_rays


@dataclass
class FrameBuffers:
    depth: np.ndarray  # (H, W) camera-frame z in meters, inf on miss
    normals: np.ndarray  # (H, W, 3) camera-frame unit normals, zero on miss
    semantics: np.ndarray  # (H, W) int labels, 0 = background

    def __eq__(self, other):
        if not isinstance(other, FrameBuffers):
            return NotImplemented
        return (
            np.array_equal(self.depth, other.depth)
            and np.array_equal(self.normals, other.normals)
            and np.array_equal(self.semantics, other.semantics)
        )

    def semantic_rgb(self) -> np.ndarray:
        """Flat-shaded colour image: a fixed colour per semantic id."""
        ids = self.semantics.astype(np.uint32)
        r = (ids * 97 + 13) % 256
        g = (ids * 57 + 101) % 256
        b = (ids * 173 + 47) % 256
        rgb = np.stack([r, g, b], axis=-1).astype(np.uint8)
        rgb[self.semantics == 0] = 0
        return rgb


def render_frame(
    cam: CameraIntrinsics,
    pose: RigidTransform,
    scene: Sequence,
    body: Sequence = (),
) -> FrameBuffers:
    """Cast one ray per pixel centre; nearest hit beyond the near clip wins."""
    h, w = cam.height, cam.width
    dirs_cam = cam.ray_directions().reshape(-1, 3)
    dirs = dirs_cam @ pose.rotation.T
    origin = pose.translation
    depth = np.full(h * w, np.inf)
    normals = np.zeros((h * w, 3))
    labels = np.zeros(h * w, dtype=np.int64)
    dir_sq = np.einsum("ij,ij->i", dirs, dirs)
    for prim in list(scene) + list(body):
        mask = candidate_rays(prim, origin, dirs, dir_sq, cam.near_clip, depth)
        if mask is None:
            idx = np.arange(dirs.shape[0])
        else:
            idx = np.flatnonzero(mask)
            if idx.size == 0:
                continue
        t, n = prim.intersect(origin, dirs[idx], cam.near_clip)
        closer = t < depth[idx]
        if not closer.any():
            continue
        sel = idx[closer]
        depth[sel] = t[closer]
        normals[sel] = n[closer]
        labels[sel] = prim.semantic_id
    hit = np.isfinite(depth)
    n_cam = normals @ pose.rotation
    # face the viewer (rays leaving a solid see the inner side)
    facing = np.einsum("ij,ij->i", n_cam, dirs_cam)
    n_cam = np.where((facing > 0)[:, None], -n_cam, n_cam)
    n_cam[~hit] = 0.0
    return FrameBuffers(depth.reshape(h, w), n_cam.reshape(h, w, 3), labels.reshape(h, w))


def average_frames(frames: Sequence[FrameBuffers]) -> FrameBuffers:
    """Per-pixel blend of rendered samples.

    Depth and normals average over the samples that hit something; the label
    is the majority among hitting samples (ties -> smallest id). Pixels no
    sample hit stay background with infinite depth.
    """
    if not frames:
        raise ValueError("cannot average an empty list of frames")
    if len(frames) == 1:
        f = frames[0]
        return FrameBuffers(f.depth.copy(), f.normals.copy(), f.semantics.copy())
    depth = np.stack([f.depth for f in frames])
    normals = np.stack([f.normals for f in frames])
    labels = np.stack([f.semantics for f in frames])
    hits = np.isfinite(depth)
    count = hits.sum(axis=0)
    any_hit = count > 0

    # averaging deviations from a reference sample keeps identical samples bit-exact
    first = np.argmax(hits, axis=0)
    ref_depth = np.take_along_axis(depth, first[None], axis=0)[0]
    ref_norm = np.take_along_axis(normals, first[None, ..., None], axis=0)[0]
    safe_count = np.maximum(count, 1)
    with np.errstate(invalid="ignore"):  # inf - inf on misses, masked out below
        d_dev = np.where(hits, depth - ref_depth, 0.0).sum(axis=0) / safe_count
    n_dev = np.where(hits[..., None], normals - ref_norm, 0.0).sum(axis=0) / safe_count[..., None]
    out_depth = np.where(any_hit, ref_depth + d_dev, np.inf)
    out_norm = ref_norm + n_dev
    norm = np.linalg.norm(out_norm, axis=-1, keepdims=True)
    renorm = np.abs(norm - 1.0) > 1e-12
    out_norm = np.where(renorm & (norm > 1e-12), out_norm / np.where(norm > 0, norm, 1.0), out_norm)
    out_norm = np.where((norm <= 1e-12), ref_norm, out_norm)
    out_norm[~any_hit] = 0.0

    candidates = np.unique(labels[hits])
    out_labels = np.zeros(labels.shape[1:], dtype=labels.dtype)
    best = np.zeros(labels.shape[1:], dtype=np.int64)
    for lab in candidates:  # ascending, so strict '>' keeps the smallest id on ties
        votes = ((labels == lab) & hits).sum(axis=0)
        win = votes > best
        out_labels[win] = lab
        best = np.where(win, votes, best)
    return FrameBuffers(out_depth, out_norm, out_labels)


def render_motion_blur(
    cam: CameraIntrinsics,
    pose_samples: Sequence[RigidTransform],
    scene: Sequence,
    body: Sequence = (),
    average_count: int | None = None,
    body_samples: Sequence[Sequence] | None = None,
) -> FrameBuffers:
    """Render each sub-frame pose and blend them into one blurred frame.

    ``body_samples`` optionally gives the wearer's body primitives per sample;
    otherwise ``body`` is used for every sample.
    """
    if not pose_samples:
        raise ValueError("motion blur needs at least one pose sample")
    if average_count is not None and average_count != len(pose_samples):
        raise ValueError(f"expected {average_count} pose samples, got {len(pose_samples)}")
    if body_samples is not None and len(body_samples) != len(pose_samples):
        raise ValueError("body_samples must match pose_samples in length")
    frames = [
        render_frame(cam, pose, scene, body if body_samples is None else body_samples[k])
        for k, pose in enumerate(pose_samples)
    ]
    if len(frames) == 1:
        return frames[0]
    return average_frames(frames)


def apply_dropout(frame: FrameBuffers, rate: float, rng: np.random.Generator) -> FrameBuffers:
    """Randomly blank pixels (miss: infinite depth, zero normal, background)."""
    if rate <= 0.0:
        return frame
    drop = rng.random(frame.depth.shape) < rate
    depth = np.where(drop, np.inf, frame.depth)
    normals = np.where(drop[..., None], 0.0, frame.normals)
    labels = np.where(drop, 0, frame.semantics)
    return FrameBuffers(depth, normals, labels)
