"""Individual differences in head-glance correspondence.

For one task, each subject gets a profile of two statistics over the
yaw axis (rot_y): the width of the rotation distribution while glancing
at the target region, and the absolute difference between the mean yaw
during target glances and during forward glances. Drivers who reorient
with the head score high on both (owls); drivers who move mostly the
eyes score low on both (lizards).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .data import Dataset, GlanceRegion, TaskKind

RANGE_THRESHOLD_DEG = 10.0
DIFF_THRESHOLD_DEG = 5.0
MIN_SAMPLES_FOR_TYPING = 10
RANGE_PERCENTILES = (5.0, 95.0)


@dataclass
class SubjectProfile:
    subject_id: str
    y_range: float  # degrees, width of rot_y during target-region glances
    y_mean_diff: float  # degrees, |mean rot_y target - mean rot_y forward|
    target_count: int
    forward_count: int
    mover_type: str = "unassigned"  # "owl" | "lizard" | "unassigned"


@dataclass
class ProfileResult:
    profiles: list[SubjectProfile]
    excluded: int  # subjects with no target (or no forward) glances in the task


def classify_mover(
    profile: SubjectProfile,
    range_threshold: float = RANGE_THRESHOLD_DEG,
    diff_threshold: float = DIFF_THRESHOLD_DEG,
) -> str:
    """Two-threshold typing rule; thresholds are configuration."""
    if profile.y_range < range_threshold and profile.y_mean_diff < diff_threshold:
        return "lizard"
    if profile.y_range > range_threshold and profile.y_mean_diff > diff_threshold:
        return "owl"
    return "unassigned"


def profile_subjects(
    ds: Dataset,
    task: TaskKind | str,
    target: GlanceRegion,
    forward: GlanceRegion = GlanceRegion.FORWARD,
    range_mode: str = "percentile",
    percentiles: tuple[float, float] = RANGE_PERCENTILES,
    min_count: int = MIN_SAMPLES_FOR_TYPING,
    range_threshold: float = RANGE_THRESHOLD_DEG,
    diff_threshold: float = DIFF_THRESHOLD_DEG,
) -> ProfileResult:
    """One profile per subject with target-region glances during the task.

    Subjects with zero target glances (or zero forward glances, which
    leave the mean difference undefined) are excluded and counted.
    range_mode "percentile" uses the configured percentile width;
    "minmax" uses the full sample range.
    """
    if range_mode not in ("percentile", "minmax"):
        raise ValueError(f"range_mode must be 'percentile' or 'minmax', got {range_mode!r}")
    task_value = task.value if isinstance(task, TaskKind) else TaskKind.parse(task).value
    task_mask = np.array([t == task_value for t in ds.task_ids], dtype=bool)
    if not task_mask.any():
        raise ValueError(f"dataset contains no samples for task {task_value!r}")

    target_mask = task_mask & ds.region_mask(target)
    forward_mask = task_mask & ds.region_mask(forward)
    yaw = ds.rotations[:, 1]

    profiles: list[SubjectProfile] = []
    excluded = 0
    for subject in sorted(ds.subjects):
        in_subject = ds.subject_mask([subject])
        target_yaw = yaw[in_subject & target_mask]
        forward_yaw = yaw[in_subject & forward_mask]
        if len(target_yaw) == 0 or len(forward_yaw) == 0:
            excluded += 1
            continue
        if range_mode == "minmax":
            y_range = float(target_yaw.max() - target_yaw.min())
        else:
            lo, hi = np.percentile(target_yaw, percentiles)
            y_range = float(hi - lo)
        profile = SubjectProfile(
            subject_id=subject,
            y_range=y_range,
            y_mean_diff=float(abs(target_yaw.mean() - forward_yaw.mean())),
            target_count=len(target_yaw),
            forward_count=len(forward_yaw),
        )
        if profile.target_count >= min_count and profile.forward_count >= min_count:
            profile.mover_type = classify_mover(profile, range_threshold, diff_threshold)
        profiles.append(profile)
    if not profiles:
        raise ValueError(f"no subject has both {target.value} and {forward.value} glances in task {task_value!r}")
    return ProfileResult(profiles, excluded)


@dataclass
class CorrelationResult:
    pearson_r: float
    n: int
    p_value: float

    @property
    def significant(self) -> bool:
        return self.p_value < 0.001


def correlate_profiles(profiles: list[SubjectProfile]) -> CorrelationResult:
    """Pearson correlation between y_range and y_mean_diff across subjects.

    The two-sided p-value comes from the t transform with n - 2 degrees
    of freedom.
    """
    if len(profiles) < 3:
        raise ValueError("correlation needs at least 3 profiles")
    x = np.array([p.y_range for p in profiles])
    y = np.array([p.y_mean_diff for p in profiles])
    sx, sy = x.std(), y.std()
    if sx <= 0 or sy <= 0:
        raise ValueError("correlation undefined: zero variance in a profile dimension")
    r = float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))
    r = max(-1.0, min(1.0, r))
    n = len(profiles)
    if abs(r) >= 1.0:
        p = 0.0
    else:
        t = r * np.sqrt((n - 2) / (1.0 - r * r))
        p = float(2.0 * stats.t.sf(abs(t), df=n - 2))
    return CorrelationResult(r, n, p)


# ----------------------------------------------------------------------
# plot-ready exports

def write_profiles_csv(result: ProfileResult, path: str | Path) -> None:
    """x = y_mean_diff, y = y_range, labeled by subject (scatter-ready)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "y_mean_diff", "y_range", "target_count", "forward_count", "mover_type"])
        for p in result.profiles:
            writer.writerow(
                [p.subject_id, f"{p.y_mean_diff:.6f}", f"{p.y_range:.6f}", p.target_count, p.forward_count, p.mover_type]
            )


def write_timeseries_csv(ds: Dataset, task: TaskKind | str, subject_id: str, path: str | Path) -> None:
    """Per-subject (timestamp, rot_y, glance) trace for one task."""
    task_value = task.value if isinstance(task, TaskKind) else TaskKind.parse(task).value
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp_ms", "rot_y", "glance"])
        for i in range(len(ds)):
            if ds.subject_ids[i] == subject_id and ds.task_ids[i] == task_value:
                writer.writerow([int(ds.timestamps[i]), f"{ds.rotations[i, 1]:.6f}", ds.glance_of(i).value])
