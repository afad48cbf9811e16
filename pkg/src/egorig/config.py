"""Scenario configuration (INI-style) for end-to-end rig simulation.

The grammar is documented in ``docs/config.md``.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kinematics import RigidTransform, so3_exp
from .mounts import SpringParams
from .sensors.camera import CameraIntrinsics
from .sensors.imu import NoiseModel
from .sensors.scene import Box, Capsule, Plane, Sphere


class ConfigError(ValueError):
    pass


# camera frame (x right, y down, z forward) expressed in the joint frame
LOOK_DIRECTIONS = {
    "forward": np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]),
    "backward": np.array([[0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]),
    "left": np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]),
    "right": np.array([[-1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, -1.0, 0.0]]),
    "down": np.array([[0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]),
}


@dataclass(frozen=True)
class SensorConfig:
    name: str
    joint: str
    offset: RigidTransform
    spring: SpringParams | None
    camera: CameraIntrinsics
    noise: NoiseModel


@dataclass(frozen=True)
class ScenarioConfig:
    skeleton: Path
    motions: tuple[Path, ...]
    sensors: tuple[SensorConfig, ...]
    scene: tuple = ()
    fps: float = 30.0
    seed: int = 0
    output_dir: Path | None = None
    bridge_frames: int = 10
    substeps: int = 10
    blur_samples: int = 1
    body_radius: float = 0.05
    render_body: bool = True
    canonical: dict = field(default_factory=dict, compare=False, repr=False)

    def config_hash(self, blur_samples: int | None = None) -> str:
        """SHA-256 over the normalized settings and referenced file contents.

        ``blur_samples`` is the effective value when overridden at run time.
        """
        blur = self.blur_samples if blur_samples is None else blur_samples
        h = hashlib.sha256()
        h.update(json.dumps(self.canonical, sort_keys=True).encode("utf-8"))
        h.update(f"\0blur={blur}".encode("ascii"))
        for p in (self.skeleton, *self.motions):
            h.update(b"\0" + hashlib.sha256(Path(p).read_bytes()).digest())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# value parsers


def _where(section: str, key: str) -> str:
    return f"[{section}] {key}"


def _float(sec, key, default=None, positive=False, nonneg=False) -> float:
    raw = sec.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"{_where(sec.name, key)} is required")
        return float(default)
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{_where(sec.name, key)}: expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{_where(sec.name, key)}: value must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{_where(sec.name, key)}: must be > 0")
    if nonneg and v < 0:
        raise ConfigError(f"{_where(sec.name, key)}: must be >= 0")
    return v


def _int(sec, key, default=None, minimum=None) -> int:
    raw = sec.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"{_where(sec.name, key)} is required")
        return int(default)
    try:
        v = int(raw)
    except ValueError:
        raise ConfigError(f"{_where(sec.name, key)}: expected an integer, got {raw!r}") from None
    if minimum is not None and v < minimum:
        raise ConfigError(f"{_where(sec.name, key)}: must be >= {minimum}")
    return v


def _vec3(sec, key, default=None) -> np.ndarray:
    raw = sec.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"{_where(sec.name, key)} is required")
        return np.asarray(default, dtype=float)
    parts = raw.replace(",", " ").split()
    try:
        v = np.array([float(p) for p in parts])
    except ValueError:
        raise ConfigError(f"{_where(sec.name, key)}: expected 3 numbers, got {raw!r}") from None
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ConfigError(f"{_where(sec.name, key)}: expected 3 finite numbers, got {raw!r}")
    return v


def _bool(sec, key, default: bool) -> bool:
    if key not in sec:
        return default
    try:
        return sec.getboolean(key)
    except ValueError:
        raise ConfigError(f"{_where(sec.name, key)}: expected true/false") from None


def _rotvec_deg(sec, key) -> np.ndarray:
    return so3_exp(np.radians(_vec3(sec, key, (0.0, 0.0, 0.0))))


def _path(base: Path, raw: str) -> Path:
    p = Path(raw.strip())
    return p if p.is_absolute() else (base / p)


# ---------------------------------------------------------------------------


_SCENE_KEYS = {
    "sphere": {"shape", "center", "radius", "semantic"},
    "capsule": {"shape", "p0", "p1", "radius", "semantic"},
    "box": {"shape", "center", "half_extents", "rotvec_deg", "semantic"},
    "plane": {"shape", "point", "normal", "semantic"},
}
_SCENARIO_KEYS = {
    "skeleton", "motions", "fps", "seed", "output_dir", "bridge_frames",
    "substeps", "blur_samples", "body_radius", "render_body",
}
_SENSOR_KEYS = {
    "joint", "offset", "look", "rotvec_deg", "mount",
    "mass", "stiffness", "damping", "rot_stiffness", "rot_damping", "spring_rotation",
    "hfov", "width", "height", "near_clip",
    "accel_sigma", "gyro_sigma", "pixel_dropout",
}


def _check_keys(sec, allowed: set[str]) -> None:
    for key in sec:
        if key not in allowed:
            raise ConfigError(f"[{sec.name}]: unknown key {key!r}")


def _scene_primitive(sec):
    shape = sec.get("shape", "").strip().lower()
    if shape not in _SCENE_KEYS:
        raise ConfigError(f"[{sec.name}] shape must be one of {sorted(_SCENE_KEYS)}, got {shape!r}")
    _check_keys(sec, _SCENE_KEYS[shape])
    sid = _int(sec, "semantic", minimum=1)
    try:
        if shape == "sphere":
            return Sphere(_vec3(sec, "center"), _float(sec, "radius", positive=True), sid)
        if shape == "capsule":
            return Capsule(_vec3(sec, "p0"), _vec3(sec, "p1"), _float(sec, "radius", positive=True), sid)
        if shape == "box":
            return Box(_vec3(sec, "center"), _vec3(sec, "half_extents"), _rotvec_deg(sec, "rotvec_deg"), sid)
        n = _vec3(sec, "normal")
        if np.linalg.norm(n) == 0:
            raise ConfigError(f"[{sec.name}] normal must be non-zero")
        return Plane(_vec3(sec, "point"), n / np.linalg.norm(n), sid)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}]: {exc}") from None


def _sensor(sec) -> SensorConfig:
    _check_keys(sec, _SENSOR_KEYS)
    name = sec.name.split(".", 1)[1]
    if not name or "/" in name or name in {".", ".."}:
        raise ConfigError(f"[{sec.name}]: invalid sensor name")
    joint = sec.get("joint")
    if not joint:
        raise ConfigError(f"[{sec.name}] joint is required")
    look = sec.get("look", "forward").strip().lower()
    if look not in LOOK_DIRECTIONS:
        raise ConfigError(f"[{sec.name}] look must be one of {sorted(LOOK_DIRECTIONS)}, got {look!r}")
    rot = LOOK_DIRECTIONS[look] @ _rotvec_deg(sec, "rotvec_deg")
    offset = RigidTransform(rot, _vec3(sec, "offset", (0.0, 0.0, 0.0)))

    mount = sec.get("mount", "spring").strip().lower()
    if mount not in ("rigid", "spring"):
        raise ConfigError(f"[{sec.name}] mount must be 'rigid' or 'spring', got {mount!r}")
    spring = None
    if mount == "spring":
        d = SpringParams()
        spring = SpringParams(
            mass=_float(sec, "mass", d.mass, positive=True),
            stiffness=_float(sec, "stiffness", d.stiffness, positive=True),
            damping=_float(sec, "damping", d.damping, positive=True),
            rot_stiffness=_float(sec, "rot_stiffness", d.rot_stiffness, positive=True),
            rot_damping=_float(sec, "rot_damping", d.rot_damping, positive=True),
            spring_rotation=_bool(sec, "spring_rotation", True),
        )
    try:
        cam = CameraIntrinsics(
            hfov=_float(sec, "hfov", 118.0),
            width=_int(sec, "width", 640, minimum=1),
            height=_int(sec, "height", 360, minimum=1),
            near_clip=_float(sec, "near_clip", 0.01, nonneg=True),
        )
        noise = NoiseModel(
            accel_sigma=_float(sec, "accel_sigma", 0.0, nonneg=True),
            gyro_sigma=_float(sec, "gyro_sigma", 0.0, nonneg=True),
            pixel_dropout=_float(sec, "pixel_dropout", 0.0, nonneg=True),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}]: {exc}") from None
    return SensorConfig(name, joint.strip(), offset, spring, cam, noise)


def parse_config(text: str, base_dir=".") -> ScenarioConfig:
    base = Path(base_dir)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if "scenario" not in cp:
        raise ConfigError("missing [scenario] section")
    sc = cp["scenario"]
    _check_keys(sc, _SCENARIO_KEYS)

    for s in cp.sections():
        if s != "scenario" and not s.startswith(("scene.", "sensor.")):
            raise ConfigError(f"unknown section [{s}]")

    if "skeleton" not in sc:
        raise ConfigError("[scenario] skeleton is required")
    motions_raw = [m for m in sc.get("motions", "").replace("\n", ",").split(",") if m.strip()]
    if not motions_raw:
        raise ConfigError("[scenario] motions must list at least one motion file")

    sensors = tuple(_sensor(cp[s]) for s in cp.sections() if s.startswith("sensor."))
    if not sensors:
        raise ConfigError("config defines no [sensor.*] sections; the rig must be non-empty")
    scene = tuple(_scene_primitive(cp[s]) for s in cp.sections() if s.startswith("scene."))

    canonical = {
        s: {k: " ".join(v.split()) for k, v in sorted(cp[s].items())}
        for s in sorted(cp.sections())
    }
    out_raw = sc.get("output_dir")
    return ScenarioConfig(
        skeleton=_path(base, sc["skeleton"]),
        motions=tuple(_path(base, m) for m in motions_raw),
        sensors=sensors,
        scene=scene,
        fps=_float(sc, "fps", 30.0, positive=True),
        seed=_int(sc, "seed", 0, minimum=0),
        output_dir=_path(base, out_raw) if out_raw else None,
        bridge_frames=_int(sc, "bridge_frames", 10, minimum=0),
        substeps=_int(sc, "substeps", 10, minimum=1),
        blur_samples=_int(sc, "blur_samples", 1, minimum=1),
        body_radius=_float(sc, "body_radius", 0.05, positive=True),
        render_body=_bool(sc, "render_body", True),
        canonical=canonical,
    )


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
