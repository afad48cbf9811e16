"""Bundled synthetic assets: a 17-joint body and a procedural walk cycle.

World frame is z-up with the walker heading along +x. The bundled files in
``egorig/data`` are produced by :func:`write_bundled_assets`.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .kinematics import Skeleton, format_skeleton, rot_x, rot_y, rot_z
from .motion import MotionSequence, format_motion_csv, load_motion

BODY_JOINTS = [
    # name, parent, rest offset in parent frame (m)
    ("pelvis", -1, (0.0, 0.0, 0.0)),
    ("spine", 0, (0.0, 0.0, 0.12)),
    ("chest", 1, (0.0, 0.0, 0.25)),
    ("neck", 2, (0.0, 0.0, 0.20)),
    ("head", 3, (0.0, 0.0, 0.15)),
    ("l_shoulder", 2, (0.0, 0.18, 0.15)),
    ("l_elbow", 5, (0.0, 0.0, -0.28)),
    ("l_wrist", 6, (0.0, 0.0, -0.26)),
    ("r_shoulder", 2, (0.0, -0.18, 0.15)),
    ("r_elbow", 8, (0.0, 0.0, -0.28)),
    ("r_wrist", 9, (0.0, 0.0, -0.26)),
    ("l_hip", 0, (0.0, 0.09, -0.05)),
    ("l_knee", 11, (0.0, 0.0, -0.42)),
    ("l_ankle", 12, (0.0, 0.0, -0.41)),
    ("r_hip", 0, (0.0, -0.09, -0.05)),
    ("r_knee", 14, (0.0, 0.0, -0.42)),
    ("r_ankle", 15, (0.0, 0.0, -0.41)),
]

PELVIS_HEIGHT = 0.93


def body_skeleton(scale: float = 1.0) -> Skeleton:
    return Skeleton(
        names=[j[0] for j in BODY_JOINTS],
        parents=[j[1] for j in BODY_JOINTS],
        offsets=[j[2] for j in BODY_JOINTS],
        scales=[scale] * len(BODY_JOINTS),
    )


def synthetic_walk(
    skel: Skeleton | None = None,
    seconds: float = 4.0,
    fps: float = 30.0,
    speed: float = 1.2,
    cadence: float = 0.9,
) -> MotionSequence:
    """Straight-line walk with counter-swinging arms.

    ``cadence`` is gait cycles per second. Hips and shoulders swing in
    antiphase, knees and elbows flex; the pelvis bobs twice per cycle.
    """
    skel = skel or body_skeleton()
    idx = {n: i for i, n in enumerate(skel.names)}
    n = int(round(seconds * fps)) + 1
    t = np.arange(n) / fps
    w = 2.0 * np.pi * cadence
    phase = w * t

    root_t = np.stack(
        [speed * t, 0.015 * np.sin(phase), PELVIS_HEIGHT + 0.02 * np.cos(2.0 * phase)], axis=1
    )
    root_r = np.stack([rot_z(0.06 * np.sin(p)) @ rot_x(0.03 * np.sin(p)) for p in phase])

    local = np.tile(np.eye(3), (n, skel.num_joints, 1, 1))
    for f, p in enumerate(phase):
        s = np.sin(p)
        # rot_y(+a) swings a downward-pointing limb backwards (-x)
        local[f, idx["l_hip"]] = rot_y(-0.40 * s)
        local[f, idx["r_hip"]] = rot_y(0.40 * s)
        local[f, idx["l_knee"]] = rot_y(0.35 * (1.0 + np.sin(p - 1.2)))
        local[f, idx["r_knee"]] = rot_y(0.35 * (1.0 - np.sin(p - 1.2)))
        local[f, idx["l_shoulder"]] = rot_y(0.45 * s)
        local[f, idx["r_shoulder"]] = rot_y(-0.45 * s)
        local[f, idx["l_elbow"]] = rot_y(-0.25 - 0.20 * np.maximum(-s, 0.0))
        local[f, idx["r_elbow"]] = rot_y(-0.25 - 0.20 * np.maximum(s, 0.0))
        local[f, idx["spine"]] = rot_z(-0.05 * s)
        local[f, idx["neck"]] = rot_z(-0.04 * np.sin(p))
    return MotionSequence(skel, fps, root_r, root_t, local, label="walk")


def data_path(name: str) -> Path:
    return Path(str(resources.files("egorig") / "data" / name))


def load_bundled_skeleton() -> Skeleton:
    from .kinematics import load_skeleton

    return load_skeleton(data_path("body.skel"))


def load_bundled_walk() -> MotionSequence:
    return load_motion(data_path("walk.csv"), load_bundled_skeleton())


def write_bundled_assets(directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    skel = body_skeleton()
    (directory / "body.skel").write_text(format_skeleton(skel), encoding="utf-8")
    (directory / "walk.csv").write_text(format_motion_csv(synthetic_walk(skel)), encoding="utf-8")
