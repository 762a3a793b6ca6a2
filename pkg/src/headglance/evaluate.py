"""Performance metrics and the Monte-Carlo experiment harness.

Every experiment is a binary glance-classification problem evaluated over
repeated subject-level splits. Per iteration: split subjects, fit the
normalizer on the training partition, optionally balance the training
classes (never the test set), train one or more classifiers, and
accumulate a confusion table on the held-out subjects. The three
performance measures are accuracy, F1 (positive predictive value x
sensitivity), and Cohen's kappa; reported values are means over
iterations.

The positive class for F1 is the second region of the pair (the off-road
target); kappa is computed against the ground-truth labels.
"""
from __future__ import annotations

import csv
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .classifiers import (
    ForestParams,
    HmmParams,
    MlpParams,
    forest_classify_batch,
    forest_train,
    hmm_classify_sequences,
    hmm_train,
    knn_classify_batch,
    make_sequences,
    mlp_classify_batch,
    mlp_train,
    train_knn,
)
from .data import Dataset, GlanceRegion, filter_binary
from .preprocess import NormalizationParams, SplitPlan, apply_normalizer, balance, fit_normalizer, split_subjects
from .seeds import substream

CONDITIONS = ("original", "balanced")
BUILTIN_CLASSIFIERS = ("knn", "forest", "mlp", "hmm")
BALANCE_SCOPES = ("train+test", "train")

# How the sequence classifier weighs classes: "train-frequency" scores each
# class with its training-sample log share on top of the sequence
# log-likelihood, which makes the model sensitive to class skew the same way
# the per-sample classifiers are; "uniform" uses the bare likelihood.
DEFAULT_HMM_PRIOR = "train-frequency"


# ----------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion table for a designated positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")
        if self.total == 0:
            raise ValueError("confusion table is empty")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_pairs(cls, truth: np.ndarray, predicted: np.ndarray) -> "ConfusionCounts":
        """Count a 0/1 label pair list (1 = positive class)."""
        truth = np.asarray(truth, dtype=bool)
        predicted = np.asarray(predicted, dtype=bool)
        if truth.shape != predicted.shape:
            raise ValueError("truth and prediction lengths differ")
        return cls(
            tp=int((truth & predicted).sum()),
            fp=int((~truth & predicted).sum()),
            fn=int((truth & ~predicted).sum()),
            tn=int((~truth & ~predicted).sum()),
        )


def accuracy(c: ConfusionCounts) -> float:
    """Share of correctly classified samples."""
    return (c.tp + c.tn) / c.total


def f1_score(c: ConfusionCounts) -> float:
    """Harmonic combination of positive predictive value and sensitivity.

    PPV = tp / (tp + fp), sensitivity = tp / (tp + fn). Defined as 0 when
    there are no true positives.
    """
    if c.tp == 0:
        return 0.0
    ppv = c.tp / (c.tp + c.fp)
    sens = c.tp / (c.tp + c.fn)
    return 2.0 * ppv * sens / (ppv + sens)


def cohens_kappa(c: ConfusionCounts) -> float:
    """Chance-corrected agreement between predictions and the truth."""
    total = c.total
    p_observed = (c.tp + c.tn) / total
    p_chance = ((c.tp + c.fp) * (c.tp + c.fn) + (c.fn + c.tn) * (c.fp + c.tn)) / total**2
    if p_chance >= 1.0:
        return 0.0
    return (p_observed - p_chance) / (1.0 - p_chance)


def metrics_triple(c: ConfusionCounts) -> tuple[float, float, float]:
    return accuracy(c), f1_score(c), cohens_kappa(c)


# ----------------------------------------------------------------------
# experiment configuration and results

@dataclass(frozen=True)
class GridSpec:
    """One class pair evaluated across classifiers and conditions.

    balance_scope controls what the balanced condition subsamples:
    "train+test" balances both folds (the dataset-level reading of a
    balanced condition, which chance-corrected metrics respond to) and
    "train" balances only the training fold, leaving the natural test
    skew in place. Normalization is always fit before balancing.
    """

    pair: tuple[GlanceRegion, GlanceRegion]
    classifiers: tuple[str, ...] = BUILTIN_CLASSIFIERS
    conditions: tuple[str, ...] = CONDITIONS
    plan: SplitPlan = SplitPlan()
    normalize_scope: str = "train"
    balance_scope: str = "train+test"
    hyper: dict = field(default_factory=dict)  # per-classifier overrides

    def __post_init__(self):
        if self.pair[0] == self.pair[1]:
            raise ValueError("class pair must contain two distinct regions")
        for condition in self.conditions:
            if condition not in CONDITIONS:
                raise ValueError(f"unknown condition: {condition!r}")
        if self.normalize_scope not in ("train", "all"):
            raise ValueError(f"normalize_scope must be 'train' or 'all', got {self.normalize_scope!r}")
        if self.balance_scope not in BALANCE_SCOPES:
            raise ValueError(f"balance_scope must be one of {BALANCE_SCOPES}, got {self.balance_scope!r}")


@dataclass
class IterationResult:
    iteration: int
    counts: ConfusionCounts | None
    skipped_reason: str | None = None

    @property
    def triple(self) -> tuple[float, float, float] | None:
        return None if self.counts is None else metrics_triple(self.counts)


@dataclass
class EvaluationReport:
    """Per-iteration and aggregate metrics for one (classifier, condition)."""

    classifier: str
    pair: tuple[GlanceRegion, GlanceRegion]
    condition: str
    plan: SplitPlan
    unit: str  # "samples" or "sequences"
    iterations: list[IterationResult]

    def completed(self) -> list[IterationResult]:
        return [r for r in self.iterations if r.counts is not None]

    @property
    def skipped(self) -> int:
        return len(self.iterations) - len(self.completed())

    def _mean(self, index: int) -> float:
        values = [r.triple[index] for r in self.completed()]
        return float(np.mean(values))

    @property
    def mean_accuracy(self) -> float:
        return self._mean(0)

    @property
    def mean_f1(self) -> float:
        return self._mean(1)

    @property
    def mean_kappa(self) -> float:
        return self._mean(2)

    def summary_row(self) -> str:
        return f"{self.mean_accuracy:.2f}  {self.mean_f1:.2f}  {self.mean_kappa:.2f}"


REPORT_CSV_COLUMNS = ("classifier", "pair", "condition", "iteration", "ac", "fs", "kp", "note")


def write_report_csv(reports: Sequence[EvaluationReport], path: str | Path) -> None:
    """Emit per-iteration rows plus one means row per report."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_CSV_COLUMNS)
        for report in reports:
            pair = f"{report.pair[0].value}|{report.pair[1].value}"
            for result in report.iterations:
                if result.counts is None:
                    writer.writerow(
                        [report.classifier, pair, report.condition, result.iteration, "", "", "", result.skipped_reason]
                    )
                else:
                    ac, fs, kp = result.triple
                    writer.writerow(
                        [report.classifier, pair, report.condition, result.iteration]
                        + [f"{v:.6f}" for v in (ac, fs, kp)]
                        + [""]
                    )
            writer.writerow(
                [report.classifier, pair, report.condition, "mean"]
                + [f"{v:.6f}" for v in (report.mean_accuracy, report.mean_f1, report.mean_kappa)]
                + [f"unit={report.unit}"]
            )


# ----------------------------------------------------------------------
# classifier adapters

Predictions = tuple[np.ndarray, np.ndarray, str]  # (truth, predicted, unit)


def _labels_for(ds: Dataset, pair: tuple[GlanceRegion, GlanceRegion]) -> np.ndarray:
    return ds.region_mask(pair[1]).astype(np.int64)


def _fit_predict_samples(
    kind: str,
    hyper: dict,
    train: Dataset,
    test: Dataset,
    pair: tuple[GlanceRegion, GlanceRegion],
    seed: int,
) -> Predictions:
    train_x, train_y = train.rotations, _labels_for(train, pair)
    test_x, test_y = test.rotations, _labels_for(test, pair)
    if kind == "knn":
        k = int(hyper.get("k", 5))
        if k > len(train_x):  # tiny folds: clamp to the largest odd k that fits
            k = len(train_x) if len(train_x) % 2 == 1 else len(train_x) - 1
        model = train_knn(train_x, train_y, k=k)
        predicted = knn_classify_batch(model, test_x)
    elif kind == "forest":
        params = ForestParams(**{k: v for k, v in hyper.items() if k in ForestParams.__dataclass_fields__})
        model = forest_train(train_x, train_y, params, seed=seed)
        predicted = forest_classify_batch(model, test_x)
    elif kind == "mlp":
        params = MlpParams(**{k: v for k, v in hyper.items() if k in MlpParams.__dataclass_fields__})
        model = mlp_train(train_x, train_y, params, seed=seed)
        predicted = mlp_classify_batch(model, test_x)
    else:
        raise ValueError(f"unknown sample classifier: {kind!r}")
    return test_y, predicted, "samples"


def _fit_predict_hmm(
    hyper: dict,
    train: Dataset,
    test: Dataset,
    pair: tuple[GlanceRegion, GlanceRegion],
    seed: int,
) -> Predictions:
    params = HmmParams(**{k: v for k, v in hyper.items() if k in HmmParams.__dataclass_fields__})
    prior_mode = hyper.get("class_prior", DEFAULT_HMM_PRIOR)
    train_seqs = make_sequences(train, *pair)
    by_class: dict[str, list[np.ndarray]] = {pair[0].value: [], pair[1].value: []}
    frame_counts = {pair[0].value: 0, pair[1].value: 0}
    for seq in train_seqs:
        by_class[seq.label.value].append(seq.features)
        frame_counts[seq.label.value] += len(seq)
    models = {}
    for idx, (label, seqs) in enumerate(sorted(by_class.items())):
        if not seqs:
            raise ValueError(f"no training sequences for class {label}")
        models[label] = hmm_train(seqs, params, seed=seed + idx)
    log_priors = None
    if prior_mode == "train-frequency":
        total = sum(frame_counts.values())
        log_priors = {label: float(np.log(frame_counts[label] / total)) for label in frame_counts}
    elif prior_mode != "uniform":
        raise ValueError(f"unknown class_prior mode: {prior_mode!r}")

    test_seqs = make_sequences(test, *pair)
    predicted_labels = hmm_classify_sequences(models, [s.features for s in test_seqs], log_priors)
    positive = pair[1].value
    truth = np.array([s.label.value == positive for s in test_seqs], dtype=np.int64)
    predicted = np.array([lbl == positive for lbl in predicted_labels], dtype=np.int64)
    return truth, predicted, "sequences"


# extension point used by tests (oracle and coin-flip predictors)
ClassifierFn = Callable[[dict, Dataset, Dataset, tuple[GlanceRegion, GlanceRegion], int], Predictions]
EXTRA_CLASSIFIERS: dict[str, ClassifierFn] = {}


def register_classifier(name: str, fn: ClassifierFn) -> None:
    EXTRA_CLASSIFIERS[name] = fn


def _dispatch(kind: str, hyper: dict, train: Dataset, test: Dataset, pair, seed: int) -> Predictions:
    if kind in ("knn", "forest", "mlp"):
        return _fit_predict_samples(kind, hyper, train, test, pair, seed)
    if kind == "hmm":
        return _fit_predict_hmm(hyper, train, test, pair, seed)
    if kind in EXTRA_CLASSIFIERS:
        return EXTRA_CLASSIFIERS[kind](hyper, train, test, pair, seed)
    raise ValueError(f"unknown classifier kind: {kind!r}")


# ----------------------------------------------------------------------
# the Monte-Carlo loop

def _run_iteration(ds: Dataset, grid: GridSpec, iteration: int) -> dict[tuple[str, str], IterationResult]:
    pair = grid.pair
    plan = grid.plan
    cells = [(c, cond) for c in grid.classifiers for cond in grid.conditions]

    train_full, test_full = split_subjects(ds, plan, iteration)
    scope_ds = ds if grid.normalize_scope == "all" else train_full
    try:
        params = fit_normalizer(scope_ds)
    except ValueError as exc:
        return {cell: IterationResult(iteration, None, str(exc)) for cell in cells}
    train_norm = apply_normalizer(train_full, params)
    test_norm = apply_normalizer(test_full, params)

    def _classes_present(d: Dataset) -> bool:
        return d.count(pair[0]) > 0 and d.count(pair[1]) > 0

    try:
        train_pair = filter_binary(train_norm, *pair)
        test_pair = filter_binary(test_norm, *pair)
    except ValueError as exc:
        return {cell: IterationResult(iteration, None, str(exc)) for cell in cells}
    if not _classes_present(test_pair):
        return {cell: IterationResult(iteration, None, "class absent from test fold") for cell in cells}
    if not _classes_present(train_pair):
        return {cell: IterationResult(iteration, None, "class absent from train fold") for cell in cells}

    folds = {"original": (train_pair, test_pair)}
    if "balanced" in grid.conditions:
        balanced_train = balance(train_pair, pair[0], pair[1], substream(plan.rng_seed, "balance", iteration))
        balanced_test = test_pair
        if grid.balance_scope == "train+test":
            balanced_test = balance(test_pair, pair[0], pair[1], substream(plan.rng_seed, "balance-test", iteration))
        folds["balanced"] = (balanced_train, balanced_test)

    out: dict[tuple[str, str], IterationResult] = {}
    for classifier in grid.classifiers:
        hyper = dict(grid.hyper.get(classifier, {}))
        for cond_idx, condition in enumerate(grid.conditions):
            seed_stream = substream(plan.rng_seed, f"train-{classifier}", iteration, cond_idx)
            seed = int(seed_stream.integers(0, 2**31 - 1))
            cond_train, cond_test = folds[condition]
            try:
                truth, predicted, unit = _dispatch(classifier, hyper, cond_train, cond_test, pair, seed)
                counts = ConfusionCounts.from_pairs(truth, predicted)
                out[(classifier, condition)] = IterationResult(iteration, counts)
            except ValueError as exc:
                out[(classifier, condition)] = IterationResult(iteration, None, str(exc))
    return out


_FORK_CONTEXT: tuple[Dataset, GridSpec] | None = None


def _forked_iteration(iteration: int) -> dict[tuple[str, str], IterationResult]:
    ds, grid = _FORK_CONTEXT  # type: ignore[misc]
    return _run_iteration(ds, grid, iteration)


def run_grid(ds: Dataset, grid: GridSpec, jobs: int = 1) -> dict[tuple[str, str], EvaluationReport]:
    """Run every (classifier, condition) cell over the Monte-Carlo plan.

    Iterations are independent; with jobs > 1 they run in forked workers.
    Results are assembled in iteration order, so output is identical for
    any job count.
    """
    n_iter = grid.plan.iteration_count
    if jobs > 1:
        global _FORK_CONTEXT
        _FORK_CONTEXT = (ds, grid)
        try:
            with multiprocessing.get_context("fork").Pool(processes=jobs) as pool:
                per_iteration = pool.map(_forked_iteration, range(n_iter))
        finally:
            _FORK_CONTEXT = None
    else:
        per_iteration = [_run_iteration(ds, grid, i) for i in range(n_iter)]

    reports: dict[tuple[str, str], EvaluationReport] = {}
    for classifier in grid.classifiers:
        unit = "sequences" if classifier == "hmm" else "samples"
        for condition in grid.conditions:
            results = [per_iteration[i][(classifier, condition)] for i in range(n_iter)]
            report = EvaluationReport(classifier, grid.pair, condition, grid.plan, unit, results)
            if report.skipped * 2 > n_iter:
                reasons = {r.skipped_reason for r in results if r.skipped_reason}
                raise RuntimeError(
                    f"{classifier}/{condition}: more than half of the iterations were skipped ({reasons})"
                )
            reports[(classifier, condition)] = report
    return reports


def run_experiment(
    ds: Dataset,
    pair: tuple[GlanceRegion, GlanceRegion],
    classifier: str,
    condition: str,
    plan: SplitPlan,
    normalize_scope: str = "train",
    balance_scope: str = "train+test",
    hyper: dict | None = None,
    jobs: int = 1,
) -> EvaluationReport:
    """Single-cell convenience wrapper around :func:`run_grid`."""
    grid = GridSpec(
        pair=pair,
        classifiers=(classifier,),
        conditions=(condition,),
        plan=plan,
        normalize_scope=normalize_scope,
        balance_scope=balance_scope,
        hyper={classifier: hyper or {}},
    )
    return run_grid(ds, grid, jobs=jobs)[(classifier, condition)]


# ----------------------------------------------------------------------
# summary tables

def format_summary_table(reports: dict[tuple[str, str], EvaluationReport], classifiers: Sequence[str]) -> str:
    """Aligned text summary: one row per classifier, AC/FS/KP per condition."""
    header = f"{'classifier':<12}  {'original AC  FS  KP':<22}  {'balanced AC  FS  KP':<22}"
    lines = [header]
    for classifier in classifiers:
        cells = []
        for condition in CONDITIONS:
            report = reports.get((classifier, condition))
            cells.append(report.summary_row() if report else " " * 16)
        lines.append(f"{classifier:<12}  {cells[0]:<22}  {cells[1]:<22}")
    return "\n".join(lines)


@dataclass
class SweepRow:
    region: GlanceRegion
    classifier: str
    condition: str
    mean_accuracy: float
    mean_f1: float
    mean_kappa: float


def eccentricity_sweep(
    ds: Dataset,
    regions: Sequence[GlanceRegion],
    classifiers: Sequence[str] = ("forest", "hmm"),
    plan: SplitPlan = SplitPlan(),
    conditions: Sequence[str] = CONDITIONS,
    baseline: GlanceRegion = GlanceRegion.FORWARD,
    normalize_scope: str = "train",
    balance_scope: str = "train+test",
    hyper: dict | None = None,
    jobs: int = 1,
) -> list[SweepRow]:
    """Forward-vs-region comparison across a list of target regions.

    One Monte-Carlo grid per region; rows come back in (region,
    classifier, condition) order, ready for a Table-2 style export.
    """
    rows: list[SweepRow] = []
    for region in regions:
        grid = GridSpec(
            pair=(baseline, region),
            classifiers=tuple(classifiers),
            conditions=tuple(conditions),
            plan=plan,
            normalize_scope=normalize_scope,
            balance_scope=balance_scope,
            hyper=hyper or {},
        )
        reports = run_grid(ds, grid, jobs=jobs)
        for classifier in classifiers:
            for condition in conditions:
                report = reports[(classifier, condition)]
                rows.append(
                    SweepRow(
                        region,
                        classifier,
                        condition,
                        report.mean_accuracy,
                        report.mean_f1,
                        report.mean_kappa,
                    )
                )
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region", "classifier", "condition", "ac", "fs", "kp"])
        for row in rows:
            writer.writerow(
                [row.region.value, row.classifier, row.condition]
                + [f"{v:.6f}" for v in (row.mean_accuracy, row.mean_f1, row.mean_kappa)]
            )
