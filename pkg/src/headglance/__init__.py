"""headglance: glance-region classification from head rotation time series.

The package covers the full pipeline: landmark-based pose estimation,
dataset handling, z-score preprocessing with subject-wise Monte-Carlo
splits, class balancing, PCA exploration, four classifiers (kNN, random
forest, MLP, per-class HMMs), three performance measures (accuracy, F1,
Cohen's kappa), per-subject head-movement profiling, and a deterministic
driver simulator for desk-scale experiments.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .data import (
    Dataset,
    GlanceRegion,
    RotationSample,
    TaskKind,
    filter_binary,
    load_dataset,
    save_dataset,
)
from .evaluate import (
    ConfusionCounts,
    EvaluationReport,
    GridSpec,
    accuracy,
    cohens_kappa,
    eccentricity_sweep,
    f1_score,
    run_experiment,
    run_grid,
)
from .pca import PcaModel, averaged_components, fit_pca, project
from .pose import (
    Excluded,
    GlanceSpan,
    LandmarkFrame,
    MergedFrame,
    TimedRotation,
    default_reference_face,
    estimate_rotation,
    merge_annotations,
    merge_glance_labels,
)
from .preprocess import (
    NormalizationParams,
    SplitPlan,
    apply_normalizer,
    balance,
    fit_normalizer,
    split_subjects,
)
from .simulate import DriverSpec, RegionLayout, ScenarioSpec, default_scenario, generate
from .subjects import classify_mover, correlate_profiles, profile_subjects

__all__ = [
    "ConfusionCounts",
    "Dataset",
    "DriverSpec",
    "EvaluationReport",
    "Excluded",
    "GlanceRegion",
    "GlanceSpan",
    "GridSpec",
    "LandmarkFrame",
    "MergedFrame",
    "NormalizationParams",
    "PcaModel",
    "RegionLayout",
    "RotationSample",
    "ScenarioSpec",
    "SplitPlan",
    "TaskKind",
    "TimedRotation",
    "accuracy",
    "apply_normalizer",
    "averaged_components",
    "balance",
    "classify_mover",
    "cohens_kappa",
    "correlate_profiles",
    "default_reference_face",
    "default_scenario",
    "eccentricity_sweep",
    "estimate_rotation",
    "f1_score",
    "filter_binary",
    "fit_normalizer",
    "fit_pca",
    "generate",
    "load_dataset",
    "merge_annotations",
    "merge_glance_labels",
    "profile_subjects",
    "project",
    "run_experiment",
    "run_grid",
    "save_dataset",
    "split_subjects",
]
