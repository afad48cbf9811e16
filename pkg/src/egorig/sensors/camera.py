from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..kinematics import RigidTransform


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera; camera frame is x-right, y-down, z-forward.

    Defaults match the dataset cameras: 118 degrees horizontal FOV at 640x360.
    Pixels are square, so the vertical FOV follows from the aspect ratio.
    """

    hfov: float = 118.0  # degrees
    width: int = 640
    height: int = 360
    near_clip: float = 0.01  # m

    def __post_init__(self):
        if not 0.0 < self.hfov < 180.0:
            raise ValueError(f"horizontal FOV must lie in (0, 180) degrees, got {self.hfov}")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if not self.near_clip >= 0.0:
            raise ValueError("near clip must be non-negative")

    @property
    def focal(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.hfov) / 2.0)

    @property
    def center(self) -> tuple[float, float]:
        return self.width / 2.0, self.height / 2.0

    def ray_directions(self) -> np.ndarray:
        """Camera-frame directions through pixel centres, scaled to z = 1.

        Shape ``(height, width, 3)``; the ray parameter therefore equals depth.
        """
        cx, cy = self.center
        f = self.focal
        u = (np.arange(self.width) + 0.5 - cx) / f
        v = (np.arange(self.height) + 0.5 - cy) / f
        uu, vv = np.meshgrid(u, v)
        return np.stack([uu, vv, np.ones_like(uu)], axis=-1)


def project_point(cam: CameraIntrinsics, pose: RigidTransform, world_point) -> tuple[float, float] | None:
    """Pixel coordinates ``(u, v)`` of a world point, or ``None`` when the
    point is not in front of the near clip plane. ``pose`` is camera-to-world.
    """
    p = pose.inverse().apply(np.asarray(world_point, dtype=float))
    if p[2] <= cam.near_clip:
        return None
    cx, cy = cam.center
    return cam.focal * p[0] / p[2] + cx, cam.focal * p[1] / p[2] + cy
