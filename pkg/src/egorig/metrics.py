"""Pose-sequence evaluation metrics and the supervised loss suite."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .kinematics import ShapeError, ensure_rotation, rotation_angle, rotation_to_6d
from .motion import InsufficientFramesError, MotionSequence, finite_differences


class DegenerateAlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class PoseSequence:
    positions: np.ndarray  # (F, J, 3) global joint positions, m
    rotations: np.ndarray  # (F, J, 3, 3) local joint rotations
    root_rotations: np.ndarray  # (F, 3, 3)
    root_translations: np.ndarray  # (F, 3)
    fps: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        rot = np.asarray(self.rotations, dtype=float)
        rr = np.asarray(self.root_rotations, dtype=float)
        rt = np.asarray(self.root_translations, dtype=float)
        if pos.ndim != 3 or pos.shape[2] != 3:
            raise ShapeError(f"positions must be (F, J, 3), got {pos.shape}")
        nf, nj = pos.shape[:2]
        if rot.shape != (nf, nj, 3, 3):
            raise ShapeError(f"rotations must be ({nf}, {nj}, 3, 3), got {rot.shape}")
        if rr.shape != (nf, 3, 3) or rt.shape != (nf, 3):
            raise ShapeError("root arrays do not match frame count")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "root_rotations", rr)
        object.__setattr__(self, "root_translations", rt)

    @property
    def num_frames(self) -> int:
        return self.positions.shape[0]

    @property
    def num_joints(self) -> int:
        return self.positions.shape[1]

    @classmethod
    def from_motion(cls, seq: MotionSequence) -> "PoseSequence":
        _, pos = seq.global_pose()
        return cls(pos, seq.local_rotations, seq.root_rotations, seq.root_translations, seq.fps)


@dataclass(frozen=True)
class PoseSequencePair:
    predicted: PoseSequence
    ground_truth: PoseSequence

    def __post_init__(self):
        p, g = self.predicted, self.ground_truth
        if p.num_frames != g.num_frames:
            raise ShapeError(f"frame counts differ: {p.num_frames} vs {g.num_frames}")
        if p.num_joints != g.num_joints:
            raise ShapeError(f"joint counts differ: {p.num_joints} vs {g.num_joints}")


# ---------------------------------------------------------------------------
# metrics


def global_mpjpe(pair: PoseSequencePair) -> float:
    d = pair.predicted.positions - pair.ground_truth.positions
    return float(np.linalg.norm(d, axis=-1).mean())


def procrustes_align(source, target, scale: bool = True):
    """Best similarity (or rigid) transform mapping ``source`` onto ``target``.

    Returns ``(s, R, t)`` minimizing ``sum ||s R x_i + t - y_i||^2`` with
    ``det R = +1``. Raises :class:`DegenerateAlignmentError` for collinear
    configurations.
    """
    x = np.asarray(source, dtype=float)
    y = np.asarray(target, dtype=float)
    if x.shape != y.shape or x.ndim != 2 or x.shape[1] != 3:
        raise ShapeError(f"point sets must share shape (N, 3), got {x.shape} and {y.shape}")
    if x.shape[0] < 3:
        raise DegenerateAlignmentError("alignment needs at least 3 points")
    mx, my = x.mean(axis=0), y.mean(axis=0)
    xc, yc = x - mx, y - my
    for pts, name in ((xc, "prediction"), (yc, "ground truth")):
        sv = np.linalg.svd(pts, compute_uv=False)
        if sv[0] <= 1e-12 or sv[1] <= 1e-9 * sv[0]:
            raise DegenerateAlignmentError(f"{name} joints are collinear or coincident")
    u, sig, vt = np.linalg.svd(yc.T @ xc)
    d = np.sign(np.linalg.det(u @ vt))
    corr = np.array([1.0, 1.0, d])
    rot = (u * corr) @ vt
    s = float((sig * corr).sum() / (xc * xc).sum()) if scale else 1.0
    t = my - s * rot @ mx
    return s, rot, t


def pa_mpjpe(pair: PoseSequencePair, scale: bool = True) -> float:
    """MPJPE after per-frame Procrustes alignment of prediction to ground truth."""
    errs = []
    for x, y in zip(pair.predicted.positions, pair.ground_truth.positions):
        s, r, t = procrustes_align(x, y, scale=scale)
        aligned = s * x @ r.T + t
        errs.append(np.linalg.norm(aligned - y, axis=-1).mean())
    return float(np.mean(errs))


def mte(pair: PoseSequencePair) -> float:
    d = pair.predicted.root_translations - pair.ground_truth.root_translations
    return float(np.linalg.norm(d, axis=-1).mean())


def rotation_residual_norm(r_a, r_b) -> np.ndarray:
    """``||R_a R_b^{-1} - I||_F`` per leading index.

    Right-multiplying by the orthogonal ``R_b`` preserves the Frobenius norm,
    so this equals ``||R_a - R_b||_F``, which is exactly 0 for equal inputs.
    """
    return np.linalg.norm(np.asarray(r_a, dtype=float) - np.asarray(r_b, dtype=float), axis=(-2, -1))


def mre(pair: PoseSequencePair) -> float:
    gt = ensure_rotation(pair.ground_truth.root_rotations)
    pred = ensure_rotation(pair.predicted.root_rotations)
    return float(rotation_residual_norm(gt, pred).mean())


def mjae(pair: PoseSequencePair) -> float:
    """Mean geodesic angle (degrees) between local joint rotations."""
    gt = ensure_rotation(pair.ground_truth.rotations)
    pred = ensure_rotation(pair.predicted.rotations)
    ang = rotation_angle(np.swapaxes(gt, -1, -2) @ pred)
    return float(np.degrees(ang).mean())


def jerk(seq: PoseSequence) -> float:
    """Mean norm of the third time derivative of joint positions (m/s^3)."""
    if seq.num_frames < 4:
        raise InsufficientFramesError(f"jerk needs at least 4 frames, got {seq.num_frames}")
    _, _, j = finite_differences(seq.positions, seq.fps)
    return float(np.linalg.norm(j, axis=-1).mean())


@dataclass(frozen=True)
class MetricsReport:
    global_mpjpe: float
    pa_mpjpe: float
    mte: float
    mre: float
    mjae: float
    jerk: float

    def to_text(self) -> str:
        return "\n".join(f"{k}={v!r}" for k, v in asdict(self).items())

    @staticmethod
    def csv_header() -> str:
        return ",".join(f.name for f in fields(MetricsReport))

    def csv_row(self) -> str:
        return ",".join(repr(float(v)) for v in asdict(self).values())


def evaluate(pair: PoseSequencePair) -> MetricsReport:
    return MetricsReport(
        global_mpjpe=global_mpjpe(pair),
        pa_mpjpe=pa_mpjpe(pair),
        mte=mte(pair),
        mre=mre(pair),
        mjae=mjae(pair),
        jerk=jerk(pair.predicted),
    )


# ---------------------------------------------------------------------------
# loss suite


@dataclass(frozen=True)
class LossWeights:
    theta: float = 10.0
    position: float = 25.0
    velocity: float = 40.0
    rel_translation: float = 25.0
    rel_rotation: float = 15.0
    global_translation: float = 1.0
    global_rotation: float = 0.025
    embedding: float = 0.0005

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"loss weight {f.name} must be non-negative")


@dataclass(frozen=True)
class LossBreakdown:
    components: dict[str, float]
    weighted: dict[str, float]
    total: float

    def to_text(self) -> str:
        lines = [f"loss_{k}={v!r}" for k, v in self.components.items()]
        lines.append(f"loss_total={self.total!r}")
        return "\n".join(lines)


def loss_suite(
    pair: PoseSequencePair,
    pred_relative,
    gt_relative,
    embeddings=None,
    weights: LossWeights | None = None,
) -> LossBreakdown:
    """Weighted sum of the eight supervision terms.

    ``pred_relative`` / ``gt_relative`` are ``(R_r, t_r)`` tuples of arrays
    (F, 3, 3) and (F, 3): root motion relative to the previous frame.
    ``embeddings`` is (..., D); its term is the mean L2 norm over vectors.
    Every L1 term is a mean over elements.
    """
    w = weights or LossWeights()
    p, g = pair.predicted, pair.ground_truth
    pr_r, pr_t = (np.asarray(a, dtype=float) for a in pred_relative)
    gt_r, gt_t = (np.asarray(a, dtype=float) for a in gt_relative)
    nf = p.num_frames
    if pr_r.shape != (nf, 3, 3) or gt_r.shape != (nf, 3, 3) or pr_t.shape != (nf, 3) or gt_t.shape != (nf, 3):
        raise ShapeError("relative root arrays must be (F, 3, 3) and (F, 3)")

    comp = {}
    comp["theta"] = float(np.abs(rotation_to_6d(g.rotations) - rotation_to_6d(p.rotations)).mean())
    comp["position"] = float(np.abs(g.positions - p.positions).mean())
    if nf > 1:
        dv = np.diff(g.positions, axis=0) - np.diff(p.positions, axis=0)
        comp["velocity"] = float(np.abs(dv).mean())
    else:
        comp["velocity"] = 0.0
    comp["rel_translation"] = float(np.abs(gt_t - pr_t).mean())
    comp["rel_rotation"] = float(np.abs(rotation_to_6d(gt_r) - rotation_to_6d(pr_r)).mean())
    comp["global_translation"] = float(np.abs(g.root_translations - p.root_translations).mean())
    comp["global_rotation"] = float(rotation_residual_norm(p.root_rotations, g.root_rotations).mean())
    if embeddings is None:
        comp["embedding"] = 0.0
    else:
        z = np.atleast_1d(np.asarray(embeddings, dtype=float))
        comp["embedding"] = float(np.linalg.norm(z, axis=-1).mean())

    weighted = {k: getattr(w, k) * v for k, v in comp.items()}
    total = math.fsum(weighted.values())
    return LossBreakdown(comp, weighted, total)
