from .camera import CameraIntrinsics, project_point
from .imageio import read_pfm, read_pgm, write_pfm, write_pgm
from .imu import GRAVITY, STANDARD_GRAVITY, ImuSample, ImuStream, NoiseModel, synthesize_imu
from .render import FrameBuffers, apply_dropout, average_frames, render_frame, render_motion_blur
from .scene import BODY_SEMANTIC_ID, Box, Capsule, Plane, Sphere, body_capsules

__all__ = [
    "BODY_SEMANTIC_ID",
    "Box",
    "CameraIntrinsics",
    "Capsule",
    "FrameBuffers",
    "GRAVITY",
    "ImuSample",
    "ImuStream",
    "NoiseModel",
    "Plane",
    "STANDARD_GRAVITY",
    "Sphere",
    "apply_dropout",
    "average_frames",
    "body_capsules",
    "project_point",
    "read_pfm",
    "read_pgm",
    "render_frame",
    "render_motion_blur",
    "synthesize_imu",
    "write_pfm",
    "write_pgm",
]
