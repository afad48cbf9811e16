"""Synthetic accelerometer / gyroscope streams from a sensor trajectory."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..kinematics import so3_log
from ..mounts import MountTrajectory

STANDARD_GRAVITY = 9.80665
GRAVITY = (0.0, 0.0, -STANDARD_GRAVITY)


@dataclass(frozen=True)
class NoiseModel:
    accel_sigma: float = 0.0  # m/s^2
    gyro_sigma: float = 0.0  # rad/s
    pixel_dropout: float = 0.0  # fraction of pixels blanked per camera frame
    seed: int = 0

    def __post_init__(self):
        if self.accel_sigma < 0 or self.gyro_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")
        if not 0.0 <= self.pixel_dropout <= 1.0:
            raise ValueError("pixel dropout rate must lie in [0, 1]")


@dataclass(frozen=True)
class ImuSample:
    timestamp: float
    linear_acceleration: np.ndarray  # specific force, sensor frame, m/s^2
    angular_velocity: np.ndarray  # sensor frame, rad/s


@dataclass(frozen=True)
class ImuStream:
    """Columnar IMU data: ``t`` (N,), ``accel`` (N, 3), ``gyro`` (N, 3)."""

    t: np.ndarray
    accel: np.ndarray
    gyro: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]

    def samples(self) -> list[ImuSample]:
        return [ImuSample(float(t), a, g) for t, a, g in zip(self.t, self.accel, self.gyro)]

    def to_csv(self) -> str:
        lines = ["t,ax,ay,az,gx,gy,gz"]
        for t, a, g in zip(self.t, self.accel, self.gyro):
            lines.append(",".join(repr(float(v)) for v in (t, *a, *g)))
        return "\n".join(lines) + "\n"


def world_acceleration(positions, fps: float) -> np.ndarray:
    """Second central differences; the end frames reuse their neighbour's stencil."""
    p = np.asarray(positions, dtype=float)
    acc = np.empty_like(p)
    acc[1:-1] = ((p[2:] - p[1:-1]) - (p[1:-1] - p[:-2])) * fps**2
    acc[0] = acc[1]
    acc[-1] = acc[-2]
    return acc


def body_angular_velocity(rotations, fps: float) -> np.ndarray:
    """``log(R_i^T R_{i+1}) * fps`` in the sensor frame; the last sample repeats."""
    r = np.asarray(rotations, dtype=float)
    rel = np.swapaxes(r[:-1], -1, -2) @ r[1:]
    omega = np.empty((r.shape[0], 3))
    omega[:-1] = so3_log(rel) * fps
    omega[-1] = omega[-2]
    return omega


def synthesize_imu(
    traj: MountTrajectory,
    gravity=GRAVITY,
    noise: NoiseModel | None = None,
    rng: np.random.Generator | None = None,
) -> ImuStream:
    """Accelerometer (specific force) and gyroscope readings per trajectory frame.

    A sensor at rest reads ``R^T (0, 0, +g)``. Noise is white Gaussian drawn
    from ``rng`` or, if absent, a generator seeded with ``noise.seed``.
    """
    if len(traj) < 3:
        raise ValueError(f"IMU synthesis needs at least 3 poses, got {len(traj)}")
    g = np.asarray(gravity, dtype=float)
    a_world = world_acceleration(traj.translations, traj.fps)
    rt = np.swapaxes(traj.rotations, -1, -2)
    accel = np.einsum("fij,fj->fi", rt, a_world - g)
    gyro = body_angular_velocity(traj.rotations, traj.fps)
    if noise is not None and (noise.accel_sigma > 0 or noise.gyro_sigma > 0):
        rng = rng if rng is not None else np.random.default_rng(noise.seed)
        accel = accel + rng.normal(0.0, noise.accel_sigma, accel.shape)
        gyro = gyro + rng.normal(0.0, noise.gyro_sigma, gyro.shape)
    return ImuStream(traj.timestamps, accel, gyro)
