"""Data reduction: landmark merging and geometric head-rotation estimation.

Two analysts annotate seven facial landmarks per video frame. Frames are
merged by averaging, excluded when the analysts disagree by more than a
pixel threshold or when any landmark is missing, and the surviving frames
are converted to (pitch, yaw, roll) via a weak-perspective fit of a rigid
3-D reference face.

Axis convention (camera frame): x right, y down (image rows), z toward
the camera. rot_x is pitch about the lateral axis, rot_y yaw about the
vertical axis, rot_z roll about the optical axis. The rotation applied to
face coordinates is R = Rz(roll) @ Ry(yaw) @ Rx(pitch).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset, GlanceRegion, RotationSample
from .errors import EstimationError, ParseError

LANDMARK_ROLES = (
    "right-eye-outer",
    "right-eye-inner",
    "left-eye-outer",
    "left-eye-inner",
    "nose-tip",
    "mouth-right",
    "mouth-left",
)
N_LANDMARKS = len(LANDMARK_ROLES)

DISAGREEMENT_LIMIT_PX = 3.5


@dataclass(frozen=True)
class LandmarkFrame:
    """One frame's landmark annotations from (up to) two analysts.

    Each analyst contributes an array of shape (7, 2) in pixels; a row of
    NaN marks a landmark the analyst could not annotate reliably.
    """

    frame_id: int
    annotations: tuple[np.ndarray, ...]

    def __post_init__(self):
        for a in self.annotations:
            if a.shape != (N_LANDMARKS, 2):
                raise ValueError(f"annotation must be shape ({N_LANDMARKS}, 2), got {a.shape}")


@dataclass(frozen=True)
class MergedFrame:
    """Averaged landmarks for a frame that passed both exclusion rules."""

    frame_id: int
    landmarks: np.ndarray  # (7, 2) pixels
    disagreement: float  # mean per-landmark distance between analysts, px


@dataclass(frozen=True)
class Excluded:
    """Marker result for a frame dropped during reduction."""

    frame_id: int
    reason: str  # "missing" | "disagreement" | "degenerate"


def merge_annotations(frame: LandmarkFrame, limit_px: float = DISAGREEMENT_LIMIT_PX) -> MergedFrame | Excluded:
    """Average the two analysts' annotations or exclude the frame.

    Exclusion rules: any landmark missing from either analyst, or mean
    per-landmark distance between analysts above ``limit_px``.
    """
    if len(frame.annotations) != 2:
        raise ValueError(f"frame {frame.frame_id}: expected 2 analysts, got {len(frame.annotations)}")
    a, b = frame.annotations
    if np.isnan(a).any() or np.isnan(b).any():
        return Excluded(frame.frame_id, "missing")
    disagreement = float(np.linalg.norm(a - b, axis=1).mean())
    if disagreement > limit_px:
        return Excluded(frame.frame_id, "disagreement")
    return MergedFrame(frame.frame_id, (a + b) / 2.0, disagreement)


# ----------------------------------------------------------------------
# reference face and rotation estimation

def default_reference_face(
    interocular: float = 1.0,
    inner_eye_x: float = 0.2,
    nose_forward: float = 0.35,
    nose_drop: float = 0.30,
    mouth_drop: float = 0.55,
    mouth_width: float = 0.65,
) -> np.ndarray:
    """Anthropometric-proportion reference landmarks in face coordinates.

    These are configuration defaults, not measured ground truth. The
    subject's right side sits at negative x (it appears on the image
    left); y grows downward to match pixel rows; z points at the camera.
    """
    half_eye = interocular / 2.0
    half_mouth = mouth_width / 2.0
    return np.array(
        [
            [-half_eye, 0.0, 0.0],
            [-inner_eye_x, 0.0, 0.0],
            [half_eye, 0.0, 0.0],
            [inner_eye_x, 0.0, 0.0],
            [0.0, nose_drop, nose_forward],
            [-half_mouth, mouth_drop, 0.0],
            [half_mouth, mouth_drop, 0.0],
        ]
    )


def check_reference_face(ref: np.ndarray) -> None:
    """Validate shape and mirror symmetry of a reference face."""
    ref = np.asarray(ref, dtype=float)
    if ref.shape != (N_LANDMARKS, 3):
        raise ValueError(f"reference face must be shape ({N_LANDMARKS}, 3)")
    mirrored = ref.copy()
    mirrored[:, 0] = -mirrored[:, 0]
    # roles swap left/right under mirroring: (0,1)<->(2,3), nose fixed, (5)<->(6)
    perm = [2, 3, 0, 1, 4, 6, 5]
    if not np.allclose(ref, mirrored[perm], atol=1e-9):
        raise ValueError("reference face is not mirror-symmetric about the vertical midplane")


def rotation_matrix(pitch_deg: float, yaw_deg: float, roll_deg: float) -> np.ndarray:
    """R = Rz(roll) @ Ry(yaw) @ Rx(pitch), angles in degrees."""
    ax, ay, az = np.radians([pitch_deg, yaw_deg, roll_deg])
    cx, sx = math.cos(ax), math.sin(ax)
    cy, sy = math.cos(ay), math.sin(ay)
    cz, sz = math.cos(az), math.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


def angles_from_matrix(r: np.ndarray) -> tuple[float, float, float]:
    """Inverse of :func:`rotation_matrix`; returns (pitch, yaw, roll) degrees."""
    yaw = math.asin(max(-1.0, min(1.0, -r[2, 0])))
    pitch = math.atan2(r[2, 1], r[2, 2])
    roll = math.atan2(r[1, 0], r[0, 0])
    return math.degrees(pitch), math.degrees(yaw), math.degrees(roll)


def project_weak_perspective(
    ref: np.ndarray,
    pitch_deg: float,
    yaw_deg: float,
    roll_deg: float,
    scale: float = 1.0,
    translation: tuple[float, float] = (0.0, 0.0),
) -> np.ndarray:
    """Project reference landmarks to 2-D under weak perspective."""
    r = rotation_matrix(pitch_deg, yaw_deg, roll_deg)
    cam = ref @ r.T
    return scale * cam[:, :2] + np.asarray(translation, dtype=float)


def _angle_jacobians(pitch: float, yaw: float, roll: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # dR/dangle for R = Rz Ry Rx, angles in radians
    cx, sx = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    cz, sz = math.cos(roll), math.sin(roll)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    drx = np.array([[0, 0, 0], [0, -sx, -cx], [0, cx, -sx]])
    dry = np.array([[-sy, 0, cy], [0, 0, 0], [-cy, 0, -sy]])
    drz = np.array([[-sz, -cz, 0], [cz, -sz, 0], [0, 0, 0]])
    return rz @ ry @ drx, rz @ dry @ rx, drz @ ry @ rx


def estimate_rotation(
    frame: MergedFrame,
    ref: np.ndarray | None = None,
    focal_proxy: float = 1.0,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> tuple[float, float, float]:
    """Estimate (rot_x, rot_y, rot_z) in degrees from merged landmarks.

    Fits rotation, uniform scale, and 2-D translation by Gauss-Newton on
    the squared pixel error, starting from an orthographic Procrustes-style
    decomposition of the best affine fit. Under weak perspective the
    angles are invariant to uniform scaling and translation of the input,
    so ``focal_proxy`` only seeds the initial scale.
    """
    if ref is None:
        ref = default_reference_face()
    ref = np.asarray(ref, dtype=float)
    check_reference_face(ref)
    if focal_proxy > 0:
        ref = ref * focal_proxy  # absorbed by the scale parameter; angles unaffected
    pts = np.asarray(frame.landmarks, dtype=float)

    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    spread = float(np.linalg.norm(centered))
    if spread < 1e-9 or sv[1] < 1e-6 * sv[0]:
        raise EstimationError(f"frame {frame.frame_id}: degenerate landmark configuration")

    # affine initialization: pts ~= ref @ M.T + t
    design = np.hstack([ref, np.ones((N_LANDMARKS, 1))])
    coef, _, _, _ = np.linalg.lstsq(design, pts, rcond=None)
    m = coef[:3].T  # (2, 3)
    a, b = m[0], m[1]
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise EstimationError(f"frame {frame.frame_id}: degenerate affine fit")
    r1 = a / na
    r2 = b - (b @ r1) * r1
    nr2 = np.linalg.norm(r2)
    if nr2 < 1e-12:
        raise EstimationError(f"frame {frame.frame_id}: degenerate affine fit")
    r2 /= nr2
    r3 = np.cross(r1, r2)
    pitch, yaw, roll = (math.radians(v) for v in angles_from_matrix(np.vstack([r1, r2, r3])))
    scale = float((na + nb) / 2.0)
    tx, ty = coef[3]

    theta = np.array([pitch, yaw, roll, scale, tx, ty])
    for _ in range(max_iter):
        r = rotation_matrix(*np.degrees(theta[:3]))
        proj = theta[3] * (ref @ r.T)[:, :2] + theta[4:6]
        resid = (proj - pts).ravel()
        dr = _angle_jacobians(*theta[:3])
        jac = np.empty((2 * N_LANDMARKS, 6))
        for k in range(3):
            jac[:, k] = (theta[3] * (ref @ dr[k].T)[:, :2]).ravel()
        jac[:, 3] = (ref @ r.T)[:, :2].ravel()
        jac[:, 4] = np.tile([1.0, 0.0], N_LANDMARKS)
        jac[:, 5] = np.tile([0.0, 1.0], N_LANDMARKS)
        step, _, _, _ = np.linalg.lstsq(jac, -resid, rcond=None)
        theta += step
        if np.max(np.abs(step)) < tol:
            break

    pitch_deg, yaw_deg, roll_deg = np.degrees(theta[:3])
    # normalize into (-180, 180]
    wrap = lambda d: (d + 180.0) % 360.0 - 180.0
    return float(wrap(pitch_deg)), float(wrap(yaw_deg)), float(wrap(roll_deg))


# ----------------------------------------------------------------------
# batch reduction

@dataclass
class ReductionSummary:
    """Counts of frames kept and dropped during data reduction."""

    merged: int = 0
    excluded_disagreement: int = 0
    excluded_missing: int = 0
    excluded_degenerate: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "merged": self.merged,
            "excluded_disagreement": self.excluded_disagreement,
            "excluded_missing": self.excluded_missing,
            "excluded_degenerate": self.excluded_degenerate,
        }

    def write_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def reduce_frames(
    frames: Iterable[LandmarkFrame],
    ref: np.ndarray | None = None,
    limit_px: float = DISAGREEMENT_LIMIT_PX,
) -> tuple[list[tuple[int, float, float, float]], ReductionSummary]:
    """Merge, filter, and estimate rotation for a stream of frames.

    Returns (frame_id, rot_x, rot_y, rot_z) tuples for surviving frames
    plus the reduction summary.
    """
    out: list[tuple[int, float, float, float]] = []
    summary = ReductionSummary()
    for frame in frames:
        merged = merge_annotations(frame, limit_px=limit_px)
        if isinstance(merged, Excluded):
            if merged.reason == "missing":
                summary.excluded_missing += 1
            else:
                summary.excluded_disagreement += 1
            continue
        try:
            rx, ry, rz = estimate_rotation(merged, ref)
        except EstimationError:
            summary.excluded_degenerate += 1
            continue
        out.append((frame.frame_id, rx, ry, rz))
        summary.merged += 1
    return out, summary


# ----------------------------------------------------------------------
# glance-label merging

@dataclass(frozen=True)
class TimedRotation:
    """A rotation estimate that has not yet been labeled with a glance."""

    subject_id: str
    task_id: str
    timestamp_ms: int
    rot_x: float
    rot_y: float
    rot_z: float


@dataclass(frozen=True)
class GlanceSpan:
    """A coded glance interval [start_ms, end_ms) for one subject/task."""

    subject_id: str
    task_id: str
    start_ms: int
    end_ms: int
    region: GlanceRegion


@dataclass
class MergeResult:
    dataset: Dataset
    dropped: int


def merge_glance_labels(rotations: Sequence[TimedRotation], spans: Sequence[GlanceSpan]) -> MergeResult:
    """Label rotation samples with the glance span containing each timestamp.

    Rotations falling outside every span are dropped and counted.
    Overlapping spans within one (subject, task) stream are an input error.
    """
    by_stream: dict[tuple[str, str], list[GlanceSpan]] = {}
    for span in spans:
        if span.end_ms <= span.start_ms:
            raise ValueError(f"empty glance span: {span}")
        by_stream.setdefault((span.subject_id, span.task_id), []).append(span)
    for key, group in by_stream.items():
        group.sort(key=lambda s: s.start_ms)
        for prev, cur in zip(group, group[1:]):
            if cur.start_ms < prev.end_ms:
                raise ValueError(
                    f"overlapping glance spans for {key}: "
                    f"[{prev.start_ms}, {prev.end_ms}) and [{cur.start_ms}, {cur.end_ms})"
                )

    samples: list[RotationSample] = []
    dropped = 0
    for rot in rotations:
        group = by_stream.get((rot.subject_id, rot.task_id), [])
        region = None
        for span in group:
            if span.start_ms <= rot.timestamp_ms < span.end_ms:
                region = span.region
                break
        if region is None:
            dropped += 1
            continue
        samples.append(
            RotationSample(
                rot.subject_id, rot.task_id, rot.timestamp_ms, rot.rot_x, rot.rot_y, rot.rot_z, region
            )
        )
    return MergeResult(Dataset.from_samples(samples, provenance="merged-glance-labels"), dropped)


# ----------------------------------------------------------------------
# landmark CSV

LANDMARK_CSV_COLUMNS = ("frame_id", "analyst_id", "landmark_role", "x_px", "y_px", "missing_flag")


def load_landmark_frames(path: str | Path) -> list[LandmarkFrame]:
    """Read the landmark annotation CSV into per-frame structures.

    Expects exactly two analysts per frame and one row per
    (frame, analyst, role); a truthy missing_flag marks the landmark NaN.
    """
    path = Path(path)
    role_index = {role: i for i, role in enumerate(LANDMARK_ROLES)}
    per_frame: dict[int, dict[str, np.ndarray]] = {}
    bad: list[tuple[int, str]] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != LANDMARK_CSV_COLUMNS:
            raise ParseError(f"{path}: header must be {','.join(LANDMARK_CSV_COLUMNS)}")
        for rownum, row in enumerate(reader, start=2):
            try:
                frame_id = int(row["frame_id"])
                role = row["landmark_role"]
                if role not in role_index:
                    raise ValueError(f"unknown landmark role: {role!r}")
                analysts = per_frame.setdefault(frame_id, {})
                arr = analysts.setdefault(row["analyst_id"], np.full((N_LANDMARKS, 2), np.nan))
                if row["missing_flag"].strip() in ("1", "true", "True"):
                    arr[role_index[role]] = np.nan
                else:
                    arr[role_index[role]] = (float(row["x_px"]), float(row["y_px"]))
            except (ValueError, KeyError) as exc:
                if len(bad) < 10:
                    bad.append((rownum, str(exc)))
    if bad:
        raise ParseError(f"failed to parse {path}", bad)

    frames = []
    for frame_id in sorted(per_frame):
        analysts = per_frame[frame_id]
        annotations = tuple(analysts[k] for k in sorted(analysts))
        frames.append(LandmarkFrame(frame_id, annotations))
    return frames
