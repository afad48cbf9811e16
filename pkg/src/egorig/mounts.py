"""Sensor mounts: rigid attachment and spring-damper ("spring arm") attachment."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kinematics import (
    RigidTransform,
    ShapeError,
    so3_exp,
    so3_log,
    stack_transforms,
    unstack_transforms,
)


class SpringStabilityError(ValueError):
    pass


@dataclass(frozen=True)
class SpringParams:
    """Spring-arm constants.

    Translation is a mass-spring-damper per axis. Orientation is a massless
    Kelvin-Voigt element: ``rot_damping * omega = rot_stiffness * error``,
    i.e. a first-order pull with time constant ``rot_damping / rot_stiffness``.
    """

    mass: float = 0.1  # kg
    stiffness: float = 200.0  # N/m
    damping: float = 4.0  # N s/m
    rot_stiffness: float = 2.0  # N m/rad
    rot_damping: float = 0.05  # N m s/rad
    spring_rotation: bool = True

    def __post_init__(self):
        for name in ("mass", "stiffness", "damping", "rot_stiffness", "rot_damping"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"spring parameter {name} must be positive, got {v}")

    @classmethod
    def critically_damped(cls, mass: float, stiffness: float, **kw) -> "SpringParams":
        return cls(mass=mass, stiffness=stiffness, damping=2.0 * math.sqrt(stiffness * mass), **kw)

    @property
    def natural_frequency(self) -> float:
        return math.sqrt(self.stiffness / self.mass)

    @property
    def damping_ratio(self) -> float:
        return self.damping / (2.0 * math.sqrt(self.stiffness * self.mass))


@dataclass(frozen=True)
class MountSpec:
    joint: int
    offset: RigidTransform = field(default_factory=RigidTransform)
    spring: SpringParams | None = None  # None -> rigid

    @property
    def kind(self) -> str:
        return "rigid" if self.spring is None else "spring"


@dataclass(frozen=True)
class MountTrajectory:
    fps: float
    rotations: np.ndarray  # (F, 3, 3) sensor-to-world
    translations: np.ndarray  # (F, 3)

    def __post_init__(self):
        r = np.array(self.rotations, dtype=float)
        t = np.array(self.translations, dtype=float)
        if r.ndim != 3 or r.shape[1:] != (3, 3) or t.shape != (r.shape[0], 3):
            raise ShapeError(f"trajectory arrays have shapes {r.shape} and {t.shape}")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotations", r)
        object.__setattr__(self, "translations", t)

    def __len__(self) -> int:
        return self.rotations.shape[0]

    @property
    def poses(self) -> list[RigidTransform]:
        return unstack_transforms(self.rotations, self.translations)

    @property
    def timestamps(self) -> np.ndarray:
        return np.arange(len(self)) / self.fps

    @classmethod
    def from_poses(cls, fps: float, poses: Sequence[RigidTransform]) -> "MountTrajectory":
        r, t = stack_transforms(poses)
        return cls(fps, r, t)


def _anchor_arrays(anchors) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(anchors, MountTrajectory):
        return anchors.rotations, anchors.translations
    if isinstance(anchors, tuple) and len(anchors) == 2 and not isinstance(anchors[0], RigidTransform):
        return np.asarray(anchors[0], dtype=float), np.asarray(anchors[1], dtype=float)
    return stack_transforms(anchors)


def _rigid_arrays(anchor_r, anchor_t, offset: RigidTransform):
    rot = anchor_r @ offset.rotation
    pos = anchor_t + np.einsum("fij,j->fi", anchor_r, offset.translation)
    return rot, pos


def simulate_rigid(anchors, spec: MountSpec, fps: float = 30.0) -> MountTrajectory:
    """Sensor pose ``anchor_i @ offset`` for every frame."""
    ar, at = _anchor_arrays(anchors)
    rot, pos = _rigid_arrays(ar, at, spec.offset)
    return MountTrajectory(fps, rot, pos)


@dataclass
class SpringState:
    position: np.ndarray
    velocity: np.ndarray
    rotation: np.ndarray

    def energy(self, target: np.ndarray, params: SpringParams) -> float:
        """Kinetic plus elastic energy of the translational spring."""
        d = self.position - target
        return 0.5 * params.mass * float(self.velocity @ self.velocity) + 0.5 * params.stiffness * float(d @ d)


def max_stable_step(params: SpringParams) -> float:
    """Largest dt for which semi-implicit Euler on the translational spring is stable.

    The update matrix has spectral radius < 1 iff ``k dt^2/m + 2 c dt/m < 4``;
    with ``c = 0`` this is the familiar ``dt < 2 sqrt(m/k)``.
    """
    km, cm = params.stiffness / params.mass, params.damping / params.mass
    return (math.sqrt(cm * cm + 4.0 * km) - cm) / km


def check_stability(params: SpringParams, fps: float, substeps: int) -> None:
    dt = 1.0 / (fps * substeps)
    limit = max_stable_step(params)
    if dt >= limit:
        need = math.floor(1.0 / (fps * limit)) + 1
        raise SpringStabilityError(
            f"spring step dt={dt:.3g}s exceeds the stability limit {limit:.3g}s "
            f"(m={params.mass:g}, k={params.stiffness:g}, c={params.damping:g}); "
            f"use at least {need} substeps (got {substeps})"
        )
    if params.spring_rotation and dt * params.rot_stiffness / params.rot_damping > 1.0:
        need = math.ceil(params.rot_stiffness / (params.rot_damping * fps))
        raise SpringStabilityError(
            f"rotational spring step dt*kr/cr={dt * params.rot_stiffness / params.rot_damping:.3g} exceeds 1; "
            f"use at least {need} substeps (got {substeps})"
        )


def simulate_spring(
    anchors,
    spec: MountSpec,
    fps: float,
    substeps: int = 10,
    initial_state: SpringState | None = None,
    states: list | None = None,
) -> MountTrajectory:
    """Integrate the spring-arm mount along an anchor trajectory.

    The rigid-mount pose of frame ``i`` is the spring target during the
    ``substeps`` semi-implicit Euler steps that lead from frame ``i-1`` to
    frame ``i``. The state starts at the rigid pose of frame 0 with zero
    velocity unless ``initial_state`` is given. When ``states`` is a list, the
    per-frame :class:`SpringState` snapshots are appended to it.
    """
    if spec.spring is None:
        raise ValueError("simulate_spring requires a spring mount")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    p = spec.spring
    dt = 1.0 / (fps * substeps)
    check_stability(p, fps, substeps)

    ar, at = _anchor_arrays(anchors)
    target_r, target_t = _rigid_arrays(ar, at, spec.offset)
    n = target_r.shape[0]
    out_r = np.empty_like(target_r)
    out_t = np.empty_like(target_t)

    if initial_state is None:
        x = target_t[0].copy()
        v = np.zeros(3)
        r = target_r[0].copy()
    else:
        x = np.array(initial_state.position, dtype=float)
        v = np.array(initial_state.velocity, dtype=float)
        r = np.array(initial_state.rotation, dtype=float)
    out_t[0], out_r[0] = x, r
    if states is not None:
        states.append(SpringState(x.copy(), v.copy(), r.copy()))

    k_m, c_m = p.stiffness / p.mass, p.damping / p.mass
    rot_gain = dt * p.rot_stiffness / p.rot_damping
    for i in range(1, n):
        tgt = target_t[i]
        tgt_r = target_r[i]
        for _ in range(substeps):
            a = -k_m * (x - tgt) - c_m * v
            v = v + dt * a
            x = x + dt * v
            if p.spring_rotation:
                err = so3_log(tgt_r @ r.T)
                r = so3_exp(rot_gain * err) @ r
        if not p.spring_rotation:
            r = tgt_r
        out_t[i], out_r[i] = x, r
        if states is not None:
            states.append(SpringState(x.copy(), v.copy(), r.copy()))
    return MountTrajectory(fps, out_r, out_t)


def simulate_mount(anchors, spec: MountSpec, fps: float, substeps: int = 10) -> MountTrajectory:
    if spec.spring is None:
        return simulate_rigid(anchors, spec, fps)
    return simulate_spring(anchors, spec, fps, substeps)


def trajectory_error(a: MountTrajectory, b: MountTrajectory) -> tuple[float, float]:
    """Mean position distance (m) and mean ``||R_a R_b^T - I||_F``."""
    if len(a) != len(b):
        raise ShapeError(f"trajectory lengths differ: {len(a)} vs {len(b)}")
    pos = np.linalg.norm(a.translations - b.translations, axis=1).mean()
    # ||R_a R_b^T - I||_F == ||R_a - R_b||_F for orthogonal R_b
    rot = np.linalg.norm(a.rotations - b.rotations, axis=(1, 2)).mean()
    return float(pos), float(rot)
