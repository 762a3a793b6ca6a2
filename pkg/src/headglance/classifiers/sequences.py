"""Sample sequences: the unit the sequence classifier trains on and labels.

A sequence is a maximal run of consecutive same-label samples within one
(subject, task) stream of a binary-filtered dataset. Task boundaries
always cut a sequence, even when the label continues.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset, GlanceRegion, region_code


@dataclass(frozen=True)
class SampleSequence:
    """Ordered feature vectors sharing one (subject, task) and one label."""

    subject_id: str
    task_id: str
    features: np.ndarray  # (T, 3), timestamp order
    label: GlanceRegion

    def __len__(self) -> int:
        return len(self.features)


def make_sequences(
    ds: Dataset,
    class_a: GlanceRegion | None = None,
    class_b: GlanceRegion | None = None,
) -> list[SampleSequence]:
    """Split each (subject, task) stream into same-label runs.

    When a class pair is given, any other label in the dataset is an
    error (the input should already be binary-filtered). Sequence lengths
    always sum to the dataset size.
    """
    if class_a is not None and class_b is not None:
        allowed = {region_code(class_a), region_code(class_b)}
        present = set(np.unique(ds.glance_codes).tolist())
        if not present <= allowed:
            raise ValueError("dataset contains labels outside the requested class pair")

    # group row indices per stream, preserving dataset order within each
    streams: dict[tuple[str, str], list[int]] = {}
    for i in range(len(ds)):
        streams.setdefault((ds.subject_ids[i], ds.task_ids[i]), []).append(i)

    sequences: list[SampleSequence] = []
    for (subject_id, task_id), rows in streams.items():
        start = 0
        codes = ds.glance_codes[rows]
        for j in range(1, len(rows) + 1):
            if j == len(rows) or codes[j] != codes[start]:
                idx = rows[start:j]
                sequences.append(
                    SampleSequence(
                        subject_id,
                        task_id,
                        ds.rotations[idx].copy(),
                        ds.glance_of(idx[0]),
                    )
                )
                start = j
    return sequences
