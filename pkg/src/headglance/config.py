"""Config-file loading, schema validation, and run manifests.

Every CLI command validates its config against a published JSON schema
before doing any work, and writes a manifest next to its outputs so any
artifact can be regenerated from config plus seed alone.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import metadata, resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from .data import Dataset, GlanceRegion, load_dataset
from .errors import HeadglanceError
from .preprocess import SplitPlan
from .simulate import ScenarioSpec, default_scenario, generate


class ConfigError(HeadglanceError):
    """Invalid configuration or missing input; maps to exit code 3."""


def _schema(name: str) -> dict:
    with resources.files("headglance.schemas").joinpath(name).open() as fh:
        return json.load(fh)


def load_json_config(path: str | Path, schema_name: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    try:
        jsonschema.validate(doc, _schema(schema_name))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{path}: {exc.message}") from None
    return doc


def scenario_from_config(doc: dict, seed_override: int | None = None) -> ScenarioSpec:
    try:
        jsonschema.validate(doc, _schema("scenario.schema.json"))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"scenario config: {exc.message}") from None
    kwargs = {}
    if "frames_per_task" in doc:
        kwargs["frames_per_task"] = int(doc["frames_per_task"])
    if "forward_share" in doc:
        kwargs["forward_share"] = float(doc["forward_share"])
    return default_scenario(
        doc["profile"],
        n_subjects=int(doc["subjects"]),
        seed=int(doc["seed"]) if seed_override is None else int(seed_override),
        **kwargs,
    )


@dataclass
class ExperimentConfig:
    dataset: dict
    pairs: list[tuple[GlanceRegion, GlanceRegion]]
    classifiers: tuple[str, ...]
    conditions: tuple[str, ...]
    plan: SplitPlan
    normalize_scope: str = "train"
    balance_scope: str = "train+test"
    hyper: dict = field(default_factory=dict)
    sweep: dict | None = None
    raw: dict = field(default_factory=dict)


def _parse_region(label: str) -> GlanceRegion:
    try:
        return GlanceRegion.parse(label)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    doc = load_json_config(path, "experiment.schema.json")
    pairs = []
    for a, b in doc["pairs"]:
        pair = (_parse_region(a), _parse_region(b))
        if pair[0] == pair[1]:
            raise ConfigError(f"pair must name two distinct regions, got {a!r} twice")
        pairs.append(pair)
    plan_doc = doc["plan"]
    plan = SplitPlan(
        iteration_count=int(plan_doc["iterations"]),
        train_fraction=float(plan_doc["train_fraction"]),
        rng_seed=int(plan_doc["seed"]),
    )
    sweep = doc.get("sweep")
    if sweep is not None:
        for label in sweep["regions"]:
            _parse_region(label)
    return ExperimentConfig(
        dataset=doc["dataset"],
        pairs=pairs,
        classifiers=tuple(doc["classifiers"]),
        conditions=tuple(doc["conditions"]),
        plan=plan,
        normalize_scope=doc.get("normalize_scope", "train"),
        balance_scope=doc.get("balance_scope", "train+test"),
        hyper=doc.get("hyper", {}),
        sweep=sweep,
        raw=doc,
    )


def resolve_dataset(cfg: ExperimentConfig, seed_override: int | None = None) -> Dataset:
    if "file" in cfg.dataset:
        path = Path(cfg.dataset["file"])
        if not path.exists():
            raise ConfigError(f"dataset file not found: {path}")
        return load_dataset(path)
    return generate(scenario_from_config(cfg.dataset["scenario"], seed_override))


# ----------------------------------------------------------------------
# manifests

def config_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _package_version() -> str:
    try:
        return metadata.version("headglance")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(
    out_dir: str | Path,
    command: str,
    config_doc: dict,
    inputs: list[str],
    outputs: list[str],
    seed: int | None,
) -> Path:
    """Deterministic record of how the artifacts in out_dir were produced."""
    manifest = {
        "command": command,
        "config": config_doc,
        "config_sha256": config_hash(config_doc),
        "inputs": sorted(inputs),
        "outputs": sorted(outputs),
        "seed": seed,
        "versions": {
            "headglance": _package_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    path = Path(out_dir) / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
