"""End-to-end rig simulation: motion -> FK -> mounts -> frames + IMU -> files."""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig
from .kinematics import RigidTransform, load_skeleton, rotation_to_6d
from .motion import MotionSequence, concatenate, format_motion_csv, load_motion, resample
from .mounts import MountSpec, MountTrajectory, check_stability, simulate_rigid, simulate_spring
from .sensors.imageio import write_pfm, write_pgm
from .sensors.imu import synthesize_imu
from .sensors.render import apply_dropout, render_motion_blur
from .sensors.scene import body_capsules

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def thread_count() -> int:
    raw = os.environ.get("EGORIG_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer EGORIG_THREADS=%r", raw)
    return os.cpu_count() or 1


@dataclass
class RunManifest:
    version: str
    config_hash: str
    fps: float
    frame_count: int
    timestamps_file: str
    motion_file: str
    sensors: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "toolkit": "egorig",
                "version": self.version,
                "config_hash": self.config_hash,
                "fps": self.fps,
                "frame_count": self.frame_count,
                "timestamps": self.timestamps_file,
                "motion": self.motion_file,
                "sensors": self.sensors,
            },
            indent=2,
            sort_keys=True,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        return cls(d["version"], d["config_hash"], d["fps"], d["frame_count"], d["timestamps"], d["motion"], d["sensors"])


def build_motion(cfg: ScenarioConfig) -> MotionSequence:
    skel = load_skeleton(cfg.skeleton)
    seqs = [resample(load_motion(p, skel), cfg.fps) for p in cfg.motions]
    motion = seqs[0]
    for nxt in seqs[1:]:
        motion = concatenate(motion, nxt, cfg.bridge_frames)
    return motion


def _trajectory_csv(traj: MountTrajectory) -> str:
    lines = ["t,tx,ty,tz," + ",".join(f"r6[{k}]" for k in range(6))]
    r6 = rotation_to_6d(traj.rotations)
    for t, p, r in zip(traj.timestamps, traj.translations, r6):
        lines.append(",".join(repr(float(v)) for v in (t, *p, *r)))
    return "\n".join(lines) + "\n"


def run_simulation(cfg: ScenarioConfig, out_dir=None, blur_samples: int | None = None) -> RunManifest:
    """Simulate every sensor of the rig and write all outputs.

    Any previous manifest is removed first and the new one is written last
    (atomically), so its presence marks a complete run.
    """
    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    if out is None:
        raise ConfigError("no output directory: set [scenario] output_dir or pass --out")
    # a stale manifest would claim a complete run if this one fails
    (out / MANIFEST_NAME).unlink(missing_ok=True)
    blur = cfg.blur_samples if blur_samples is None else int(blur_samples)
    if blur < 1:
        raise ConfigError("blur samples must be >= 1")
    for p in (cfg.skeleton, *cfg.motions):
        if not Path(p).is_file():
            raise FileNotFoundError(f"referenced file not found: {p}")

    motion = build_motion(cfg)
    skel = motion.skeleton
    fps = motion.fps
    n = len(motion)
    if n < 3:
        raise ConfigError(f"motion has {n} frames; at least 3 are needed for IMU synthesis")

    joint_ids = {}
    for s in cfg.sensors:
        try:
            joint_ids[s.name] = skel.index(s.joint)
        except KeyError:
            raise ConfigError(f"[sensor.{s.name}] joint {s.joint!r} is not in the skeleton") from None

    # high-rate motion drives both the blur sub-frames and the mount physics
    fine = resample(motion, fps * blur) if blur > 1 else motion
    sub_per_fine = max(1, math.ceil(cfg.substeps / blur))
    for s in cfg.sensors:
        if s.spring is not None:
            check_stability(s.spring, fine.fps, sub_per_fine)
    g_rot, g_pos = fine.global_pose()
    frame_idx = np.arange(n) * blur

    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / MANIFEST_NAME
    timestamps = np.arange(n) / fps
    (out / "timestamps.csv").write_text(
        "frame,t\n" + "".join(f"{i},{t!r}\n" for i, t in enumerate(timestamps.tolist())), encoding="utf-8"
    )
    (out / "motion.csv").write_text(format_motion_csv(motion), encoding="utf-8")

    bodies = None
    if cfg.render_body:
        bodies = [body_capsules(skel, g_pos[k], cfg.body_radius) for k in range(len(fine))]

    seeds = np.random.SeedSequence(cfg.seed)
    sensor_seeds = seeds.spawn(len(cfg.sensors))
    workers = thread_count()
    sensors_out = {}
    for s, sseed in zip(cfg.sensors, sensor_seeds):
        j = joint_ids[s.name]
        spec = MountSpec(j, s.offset, s.spring)
        anchors = (g_rot[:, j], g_pos[:, j])
        if s.spring is None:
            fine_traj = simulate_rigid(anchors, spec, fine.fps)
        else:
            fine_traj = simulate_spring(anchors, spec, fine.fps, sub_per_fine)
        traj = MountTrajectory(fps, fine_traj.rotations[frame_idx], fine_traj.translations[frame_idx])
        imu_seed, pix_seed = sseed.spawn(2)
        imu = synthesize_imu(traj, noise=s.noise, rng=np.random.default_rng(imu_seed))

        sdir = out / s.name
        for sub in ("depth", "normal", "semantic"):
            (sdir / sub).mkdir(parents=True, exist_ok=True)
        frame_seeds = pix_seed.spawn(n)
        m = len(fine)

        def render(i, s=s, fine_traj=fine_traj, frame_seeds=frame_seeds, m=m):
            ks = [min(max(i * blur + k - blur // 2, 0), m - 1) for k in range(blur)]
            poses = [RigidTransform(fine_traj.rotations[k], fine_traj.translations[k]) for k in ks]
            body_samples = [bodies[k] for k in ks] if bodies is not None else [[] for _ in ks]
            frame = render_motion_blur(s.camera, poses, cfg.scene, body_samples=body_samples)
            return apply_dropout(frame, s.noise.pixel_dropout, np.random.default_rng(frame_seeds[i]))

        with ThreadPoolExecutor(max_workers=workers) as pool:
            frames = list(pool.map(render, range(n)))

        files = []
        for i, fr in enumerate(frames):
            names = (f"depth/{i:06d}.pfm", f"normal/{i:06d}.pfm", f"semantic/{i:06d}.pgm")
            write_pfm(sdir / names[0], fr.depth)
            write_pfm(sdir / names[1], fr.normals)
            write_pgm(sdir / names[2], fr.semantics)
            files.extend(f"{s.name}/{x}" for x in names)
        (sdir / "imu.csv").write_text(imu.to_csv(), encoding="utf-8")
        (sdir / "trajectory.csv").write_text(_trajectory_csv(traj), encoding="utf-8")
        sensors_out[s.name] = {
            "joint": s.joint,
            "mount": spec.kind,
            "frames": len(frames),
            "imu_samples": len(imu),
            "imu": f"{s.name}/imu.csv",
            "trajectory": f"{s.name}/trajectory.csv",
            "files": files,
        }
        log.info("sensor %s: %d frames", s.name, len(frames))

    manifest = RunManifest(
        version=__version__,
        config_hash=cfg.config_hash(blur),
        fps=fps,
        frame_count=n,
        timestamps_file="timestamps.csv",
        motion_file="motion.csv",
        sensors=sensors_out,
    )
    tmp = out / (MANIFEST_NAME + ".tmp")
    tmp.write_text(manifest.to_json(), encoding="utf-8")
    os.replace(tmp, manifest_path)
    return manifest
