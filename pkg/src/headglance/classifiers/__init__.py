"""The four classifiers plus model serialization.

Feature vectors are (3,) arrays of normalized rot_x, rot_y, rot_z; binary
class labels are integers 0/1 at this layer (the evaluation harness maps
glance regions onto them). The sequence classifier additionally works on
:class:`SampleSequence` runs.
"""
from __future__ import annotations

import json
from pathlib import Path

from .forest import ForestModel, ForestParams, forest_classify, forest_classify_batch, forest_train
from .hmm import (
    HmmModel,
    HmmParams,
    hmm_classify,
    hmm_classify_sequences,
    hmm_loglik_batch,
    hmm_train,
)
from .knn import KnnModel, knn_classify, knn_classify_batch, train_knn
from .mlp import MlpModel, MlpParams, mlp_classify, mlp_classify_batch, mlp_train
from .sequences import SampleSequence, make_sequences

__all__ = [
    "ForestModel",
    "ForestParams",
    "HmmModel",
    "HmmParams",
    "KnnModel",
    "MlpModel",
    "MlpParams",
    "SampleSequence",
    "forest_classify",
    "forest_classify_batch",
    "forest_train",
    "hmm_classify",
    "hmm_classify_sequences",
    "hmm_loglik_batch",
    "hmm_train",
    "knn_classify",
    "knn_classify_batch",
    "load_model",
    "make_sequences",
    "mlp_classify",
    "mlp_classify_batch",
    "mlp_train",
    "save_model",
    "train_knn",
]

_MODEL_TYPES = {
    "knn": KnnModel,
    "forest": ForestModel,
    "mlp": MlpModel,
    "hmm": HmmModel,
}


def save_model(model, path: str | Path) -> None:
    """Serialize any trained model (parameters, seed, hyperparameters) to JSON."""
    doc = model.as_dict()
    if doc.get("kind") not in _MODEL_TYPES:
        raise ValueError(f"unknown model kind: {doc.get('kind')!r}")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path):
    with open(path) as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind not in _MODEL_TYPES:
        raise ValueError(f"unknown model kind: {kind!r}")
    if doc.get("version") != 1:
        raise ValueError(f"unsupported model version: {doc.get('version')!r}")
    return _MODEL_TYPES[kind].from_dict(doc)
