"""Domain types and dataset container.

A dataset is an ordered collection of head-rotation samples, each labeled
with one of the 16 manually coded glance regions. Samples are stored
columnar (numpy arrays) for speed; rows are exposed as ``RotationSample``
objects. Within every (subject, task) stream the timestamp order of the
original recording is preserved, which the sequence classifier depends on.
"""
from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import ParseError


class GlanceRegion(enum.Enum):
    """The 16 coded glance locations."""

    FORWARD = "forward"
    LEFT_FORWARD = "left-forward"
    RIGHT_FORWARD = "right-forward"
    REARVIEW_MIRROR = "rearview-mirror"
    LEFT_WINDOW_MIRROR = "left-window-mirror"
    RIGHT_WINDOW_MIRROR = "right-window-mirror"
    OVER_SHOULDER = "over-shoulder"
    INSTRUMENT_CLUSTER = "instrument-cluster"
    CENTER_STACK = "center-stack"
    CELL_PHONE = "cell-phone"
    INTERIOR_OBJECT = "interior-object"
    PASSENGER = "passenger"
    NO_EYES_UNKNOWN = "no-eyes-unknown"
    NO_EYES_OFFROAD = "no-eyes-offroad"
    EYES_CLOSED = "eyes-closed"
    OTHER = "other"

    @classmethod
    def parse(cls, label: str) -> "GlanceRegion":
        try:
            return cls(label)
        except ValueError:
            raise ValueError(f"unknown glance label: {label!r}") from None


class TaskKind(enum.Enum):
    """The five in-vehicle tasks drivers perform during a trial."""

    REPORT_SPEED = "report-speed"
    ADJACENT_VEHICLES = "adjacent-vehicles"
    RADIO_ON_OFF = "radio-on-off"
    LOCATE_PHONE = "locate-phone"
    PHONE_CONVERSATION = "phone-conversation"

    @classmethod
    def parse(cls, label: str) -> "TaskKind":
        try:
            return cls(label)
        except ValueError:
            raise ValueError(f"unknown task id: {label!r}") from None


# Fixed region order used for the integer codes in Dataset columns.
REGION_ORDER: tuple[GlanceRegion, ...] = tuple(GlanceRegion)
_REGION_CODE = {region: i for i, region in enumerate(REGION_ORDER)}

CSV_COLUMNS = ("subject_id", "task_id", "timestamp_ms", "rot_x", "rot_y", "rot_z", "glance")

ROTATION_LIMIT_DEG = 180.0


@dataclass(frozen=True)
class RotationSample:
    """One timestamped head-rotation observation with its glance label.

    Rotations are degrees: rot_x pitch (about the lateral axis), rot_y yaw
    (vertical axis), rot_z roll (optical axis).
    """

    subject_id: str
    task_id: str
    timestamp_ms: int
    rot_x: float
    rot_y: float
    rot_z: float
    glance: GlanceRegion

    @property
    def rotation(self) -> np.ndarray:
        return np.array([self.rot_x, self.rot_y, self.rot_z])


class Dataset:
    """Immutable, order-preserving collection of rotation samples.

    Construction validates that every rotation is finite and within
    (-180, 180) degrees and that timestamps strictly increase within each
    (subject, task) stream. Instances are safe to share across workers.
    """

    __slots__ = ("subject_ids", "task_ids", "timestamps", "rotations", "glance_codes", "provenance")

    def __init__(
        self,
        subject_ids: np.ndarray,
        task_ids: np.ndarray,
        timestamps: np.ndarray,
        rotations: np.ndarray,
        glance_codes: np.ndarray,
        provenance: str = "",
        validate: bool = True,
    ):
        self.subject_ids = np.asarray(subject_ids, dtype=object)
        self.task_ids = np.asarray(task_ids, dtype=object)
        self.timestamps = np.asarray(timestamps, dtype=np.int64)
        self.rotations = np.asarray(rotations, dtype=np.float64).reshape(-1, 3)
        self.glance_codes = np.asarray(glance_codes, dtype=np.int16)
        self.provenance = provenance
        if validate:
            self._validate()
        for name in self.__slots__[:5]:
            getattr(self, name).setflags(write=False)

    def _validate(self) -> None:
        n = len(self.subject_ids)
        if not (len(self.task_ids) == len(self.timestamps) == len(self.rotations) == len(self.glance_codes) == n):
            raise ValueError("column lengths differ")
        bad: list[tuple[int, str]] = []
        finite = np.isfinite(self.rotations).all(axis=1)
        in_range = (np.abs(self.rotations) < ROTATION_LIMIT_DEG).all(axis=1)
        for i in np.flatnonzero(~(finite & in_range)):
            bad.append((int(i), "rotation not finite or out of range"))
            if len(bad) >= 10:
                break
        if not bad:
            last_seen: dict[tuple[str, str], tuple[int, int]] = {}
            for i in range(n):
                key = (self.subject_ids[i], self.task_ids[i])
                ts = int(self.timestamps[i])
                if key in last_seen and ts <= last_seen[key][1]:
                    bad.append((i, f"timestamp {ts} not after {last_seen[key][1]} for {key}"))
                    if len(bad) >= 10:
                        break
                last_seen[key] = (i, ts)
        if bad:
            raise ParseError("dataset invariant violated", bad)

    # ------------------------------------------------------------------
    # construction helpers

    @classmethod
    def from_samples(cls, samples: Iterable[RotationSample], provenance: str = "") -> "Dataset":
        rows = list(samples)
        return cls(
            np.array([s.subject_id for s in rows], dtype=object),
            np.array([s.task_id for s in rows], dtype=object),
            np.array([s.timestamp_ms for s in rows], dtype=np.int64),
            np.array([[s.rot_x, s.rot_y, s.rot_z] for s in rows], dtype=np.float64).reshape(-1, 3),
            np.array([_REGION_CODE[s.glance] for s in rows], dtype=np.int16),
            provenance=provenance,
        )

    def select(self, mask_or_index: np.ndarray, provenance: str | None = None) -> "Dataset":
        """Row subset preserving original order (boolean mask or index array)."""
        idx = np.asarray(mask_or_index)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        idx = np.sort(idx)
        return Dataset(
            self.subject_ids[idx],
            self.task_ids[idx],
            self.timestamps[idx],
            self.rotations[idx],
            self.glance_codes[idx],
            provenance if provenance is not None else self.provenance,
            validate=False,
        )

    def with_rotations(self, rotations: np.ndarray) -> "Dataset":
        """Same rows with rotation values replaced (normalization output)."""
        return Dataset(
            self.subject_ids,
            self.task_ids,
            self.timestamps,
            rotations,
            self.glance_codes,
            self.provenance,
            validate=False,
        )

    # ------------------------------------------------------------------
    # accessors

    def __len__(self) -> int:
        return len(self.subject_ids)

    def __iter__(self) -> Iterator[RotationSample]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> RotationSample:
        return RotationSample(
            self.subject_ids[i],
            self.task_ids[i],
            int(self.timestamps[i]),
            float(self.rotations[i, 0]),
            float(self.rotations[i, 1]),
            float(self.rotations[i, 2]),
            REGION_ORDER[self.glance_codes[i]],
        )

    @property
    def subjects(self) -> frozenset[str]:
        return frozenset(self.subject_ids.tolist())

    @property
    def glances(self) -> np.ndarray:
        return self.glance_codes

    def glance_of(self, i: int) -> GlanceRegion:
        return REGION_ORDER[self.glance_codes[i]]

    def region_mask(self, region: GlanceRegion) -> np.ndarray:
        return self.glance_codes == _REGION_CODE[region]

    def count(self, region: GlanceRegion) -> int:
        return int(self.region_mask(region).sum())

    def subject_mask(self, subject_ids: Iterable[str]) -> np.ndarray:
        wanted = set(subject_ids)
        return np.array([s in wanted for s in self.subject_ids], dtype=bool)


def region_code(region: GlanceRegion) -> int:
    return _REGION_CODE[region]


def filter_binary(ds: Dataset, class_a: GlanceRegion, class_b: GlanceRegion) -> Dataset:
    """Keep only samples labeled with one of the two classes, order preserved."""
    if class_a == class_b:
        raise ValueError("binary filter needs two distinct classes")
    mask = ds.region_mask(class_a) | ds.region_mask(class_b)
    if not mask.any():
        raise ValueError(f"no samples for requested class pair ({class_a.value}, {class_b.value})")
    return ds.select(mask)


# ----------------------------------------------------------------------
# file I/O

def _format_float(x: float) -> str:
    return f"{x:.6f}"


def load_dataset(path: str | Path, format: str | None = None) -> Dataset:
    """Load a dataset from CSV or JSON.

    Rows with unknown glance labels, unknown task ids, non-finite
    rotations, or non-monotone timestamps are rejected; the error lists
    the first 10 offending rows by number.
    """
    path = Path(path)
    fmt = format or ("json" if path.suffix.lower() == ".json" else "csv")
    if fmt == "csv":
        rows = _read_csv_rows(path)
    elif fmt == "json":
        rows = _read_json_rows(path)
    else:
        raise ValueError(f"unknown dataset format: {fmt!r}")

    samples: list[RotationSample] = []
    bad: list[tuple[int, str]] = []
    for rownum, record in rows:
        try:
            samples.append(_parse_record(record))
        except (ValueError, KeyError) as exc:
            if len(bad) < 10:
                bad.append((rownum, str(exc)))
    if bad:
        raise ParseError(f"failed to parse {path}", bad)
    try:
        return Dataset.from_samples(samples, provenance=str(path))
    except ParseError as exc:
        raise ParseError(f"invalid dataset in {path}", exc.rows) from None


def _read_csv_rows(path: Path) -> list[tuple[int, dict]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ParseError(f"{path}: header must be {','.join(CSV_COLUMNS)}")
        return [(i, row) for i, row in enumerate(reader, start=2)]


def _read_json_rows(path: Path) -> list[tuple[int, dict]]:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "samples" not in doc:
        raise ParseError(f"{path}: expected an object with a 'samples' array")
    return [(i, rec) for i, rec in enumerate(doc["samples"])]


def _parse_record(rec: dict) -> RotationSample:
    glance = GlanceRegion.parse(str(rec["glance"]))
    task = TaskKind.parse(str(rec["task_id"]))
    rx, ry, rz = (float(rec[k]) for k in ("rot_x", "rot_y", "rot_z"))
    for value in (rx, ry, rz):
        if not np.isfinite(value):
            raise ValueError(f"non-finite rotation: {value}")
        if abs(value) >= ROTATION_LIMIT_DEG:
            raise ValueError(f"rotation out of range: {value}")
    return RotationSample(
        subject_id=str(rec["subject_id"]),
        task_id=task.value,
        timestamp_ms=int(rec["timestamp_ms"]),
        rot_x=rx,
        rot_y=ry,
        rot_z=rz,
        glance=glance,
    )


def save_dataset(ds: Dataset, path: str | Path, format: str | None = None) -> None:
    """Emit a dataset deterministically (stable field order, 6-digit floats)."""
    path = Path(path)
    fmt = format or ("json" if path.suffix.lower() == ".json" else "csv")
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for s in ds:
                writer.writerow(
                    [
                        s.subject_id,
                        s.task_id,
                        s.timestamp_ms,
                        _format_float(s.rot_x),
                        _format_float(s.rot_y),
                        _format_float(s.rot_z),
                        s.glance.value,
                    ]
                )
    elif fmt == "json":
        records = [
            {
                "subject_id": s.subject_id,
                "task_id": s.task_id,
                "timestamp_ms": s.timestamp_ms,
                "rot_x": _format_float(s.rot_x),
                "rot_y": _format_float(s.rot_y),
                "rot_z": _format_float(s.rot_z),
                "glance": s.glance.value,
            }
            for s in ds
        ]
        with open(path, "w") as fh:
            json.dump({"samples": records}, fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError(f"unknown dataset format: {fmt!r}")
