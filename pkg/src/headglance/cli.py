"""Command-line entry point.

Subcommands wire the library into reproducible experiments:

  synth  scenario config -> dataset CSV
  pose   landmark CSV -> rotation CSV + reduction summary
  run    experiment config -> report CSV + summary tables (+ sweep)
  pca    dataset -> projection CSV + components JSON
  diffs  dataset -> per-subject profiles CSV + correlation JSON

Every command validates its inputs before any work starts, writes all
outputs under --out, and leaves a manifest beside them. Exit codes:
0 success, 2 usage, 3 validation, 4 runtime.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .config import (
    ConfigError,
    load_experiment_config,
    load_json_config,
    resolve_dataset,
    scenario_from_config,
    write_manifest,
)
from .data import GlanceRegion, filter_binary, load_dataset, save_dataset
from .errors import HeadglanceError, ParseError
from .evaluate import GridSpec, eccentricity_sweep, format_summary_table, run_grid, write_report_csv, write_sweep_csv
from .pca import fit_pca, project
from .pose import default_reference_face, load_landmark_frames, reduce_frames
from .preprocess import apply_normalizer, fit_normalizer
from .simulate import generate
from .subjects import correlate_profiles, profile_subjects, write_profiles_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_synth(args: argparse.Namespace) -> int:
    doc = load_json_config(args.config, "scenario.schema.json")
    spec = scenario_from_config(doc, args.seed)
    out = _out_dir(args.out)
    ds = generate(spec)
    save_dataset(ds, out / "dataset.csv")
    write_manifest(
        out,
        "synth",
        doc,
        inputs=[str(args.config)],
        outputs=["dataset.csv"],
        seed=spec.master_seed,
    )
    print(f"wrote {out / 'dataset.csv'} ({len(ds)} samples, {len(ds.subjects)} subjects)")
    return EXIT_OK


def _cmd_pose(args: argparse.Namespace) -> int:
    landmarks = Path(args.landmarks)
    if not landmarks.exists():
        raise ConfigError(f"landmark file not found: {landmarks}")
    cfg: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            cfg = json.load(fh)
    face_kwargs = cfg.get("reference_face", {})
    ref = default_reference_face(**face_kwargs)
    limit = float(cfg.get("disagreement_limit_px", 3.5))
    fps = float(cfg.get("fps", 15.0))

    frames = load_landmark_frames(landmarks)
    rotations, summary = reduce_frames(frames, ref, limit_px=limit)
    out = _out_dir(args.out)
    with open(out / "rotations.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_id", "timestamp_ms", "rot_x", "rot_y", "rot_z"])
        for frame_id, rx, ry, rz in rotations:
            ts = round(frame_id * 1000.0 / fps)
            writer.writerow([frame_id, ts, f"{rx:.6f}", f"{ry:.6f}", f"{rz:.6f}"])
    summary.write_json(out / "reduction.json")
    write_manifest(
        out,
        "pose",
        cfg,
        inputs=[str(landmarks)] + ([str(args.config)] if args.config else []),
        outputs=["rotations.csv", "reduction.json"],
        seed=None,
    )
    print(f"merged {summary.merged} frames, excluded {summary.excluded_disagreement} (disagreement), "
          f"{summary.excluded_missing} (missing), {summary.excluded_degenerate} (degenerate)")
    return EXIT_OK


def _pair_slug(pair: tuple[GlanceRegion, GlanceRegion]) -> str:
    return f"{pair[0].value}_vs_{pair[1].value}"


def _write_summary_csv(reports: dict, classifiers, conditions, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["classifier"]
        for condition in conditions:
            header += [f"{condition}_ac", f"{condition}_fs", f"{condition}_kp"]
        writer.writerow(header)
        for classifier in classifiers:
            row = [classifier]
            for condition in conditions:
                report = reports[(classifier, condition)]
                row += [f"{v:.6f}" for v in (report.mean_accuracy, report.mean_f1, report.mean_kappa)]
            writer.writerow(row)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_experiment_config(args.config)
    if args.seed is not None:
        cfg.plan = type(cfg.plan)(cfg.plan.iteration_count, cfg.plan.train_fraction, args.seed)
    ds = resolve_dataset(cfg, args.seed)
    out = _out_dir(args.out)
    outputs: list[str] = []

    for pair in cfg.pairs:
        grid = GridSpec(
            pair=pair,
            classifiers=cfg.classifiers,
            conditions=cfg.conditions,
            plan=cfg.plan,
            normalize_scope=cfg.normalize_scope,
            balance_scope=cfg.balance_scope,
            hyper=cfg.hyper,
        )
        reports = run_grid(ds, grid, jobs=args.jobs)
        slug = _pair_slug(pair)
        report_name = f"report_{slug}.csv"
        write_report_csv([reports[k] for k in sorted(reports)], out / report_name)
        summary_name = f"summary_{slug}.csv"
        _write_summary_csv(reports, cfg.classifiers, cfg.conditions, out / summary_name)
        text_name = f"summary_{slug}.txt"
        (out / text_name).write_text(format_summary_table(reports, cfg.classifiers) + "\n")
        outputs += [report_name, summary_name, text_name]
        print(f"{slug}:")
        print(format_summary_table(reports, cfg.classifiers))

    if cfg.sweep is not None:
        regions = [GlanceRegion.parse(r) for r in cfg.sweep["regions"]]
        rows = eccentricity_sweep(
            ds,
            regions,
            classifiers=tuple(cfg.sweep.get("classifiers", ("forest", "hmm"))),
            plan=cfg.plan,
            conditions=tuple(cfg.sweep.get("conditions", cfg.conditions)),
            normalize_scope=cfg.normalize_scope,
            balance_scope=cfg.balance_scope,
            hyper=cfg.hyper,
            jobs=args.jobs,
        )
        write_sweep_csv(rows, out / "sweep.csv")
        outputs.append("sweep.csv")
        print(f"wrote {out / 'sweep.csv'}")

    inputs = [str(args.config)]
    if "file" in cfg.dataset:
        inputs.append(cfg.dataset["file"])
    write_manifest(out, "run", cfg.raw, inputs=inputs, outputs=outputs, seed=cfg.plan.rng_seed)
    return EXIT_OK


def _cmd_pca(args: argparse.Namespace) -> int:
    path = Path(args.dataset)
    if not path.exists():
        raise ConfigError(f"dataset file not found: {path}")
    ds = load_dataset(path)
    pair = (GlanceRegion.parse(args.pair[0]), GlanceRegion.parse(args.pair[1]))
    subset = filter_binary(ds, *pair)
    if args.normalize:
        subset = apply_normalizer(subset, fit_normalizer(subset))
    model = fit_pca(subset)
    table = project(model, subset, k=args.k)
    out = _out_dir(args.out)
    table.write_csv(out / "projection.csv")
    model.write_json(out / "components.json")
    write_manifest(
        out,
        "pca",
        {"dataset": str(path), "pair": [p.value for p in pair], "k": args.k, "normalize": bool(args.normalize)},
        inputs=[str(path)],
        outputs=["projection.csv", "components.json"],
        seed=None,
    )
    ratios = ", ".join(f"{v:.3f}" for v in model.explained_variance_ratio)
    print(f"explained variance ratios: {ratios}")
    return EXIT_OK


def _cmd_diffs(args: argparse.Namespace) -> int:
    path = Path(args.dataset)
    if not path.exists():
        raise ConfigError(f"dataset file not found: {path}")
    ds = load_dataset(path)
    target = GlanceRegion.parse(args.target)
    result = profile_subjects(ds, args.task, target, range_mode=args.range_mode)
    corr = correlate_profiles(result.profiles)
    out = _out_dir(args.out)
    write_profiles_csv(result, out / "profiles.csv")
    with open(out / "correlation.json", "w") as fh:
        json.dump(
            {
                "pearson_r": corr.pearson_r,
                "n": corr.n,
                "p_value": corr.p_value,
                "significant_at_0_001": corr.significant,
                "excluded_subjects": result.excluded,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    write_manifest(
        out,
        "diffs",
        {"dataset": str(path), "task": args.task, "target": target.value, "range_mode": args.range_mode},
        inputs=[str(path)],
        outputs=["profiles.csv", "correlation.json"],
        seed=None,
    )
    print(f"profiles: {len(result.profiles)} subjects ({result.excluded} excluded), "
          f"r = {corr.pearson_r:.3f}, p = {corr.p_value:.2g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="headglance",
        description="Head-rotation based glance-region classification experiments",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset from a scenario config")
    p_synth.add_argument("--config", required=True, help="scenario config JSON")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_synth.set_defaults(func=_cmd_synth)

    p_pose = sub.add_parser("pose", help="estimate head rotations from landmark annotations")
    p_pose.add_argument("--landmarks", required=True, help="landmark CSV")
    p_pose.add_argument("--config", default=None, help="reference-face config JSON")
    p_pose.add_argument("--out", required=True, help="output directory")
    p_pose.set_defaults(func=_cmd_pose)

    p_run = sub.add_parser("run", help="run a Monte-Carlo experiment grid")
    p_run.add_argument("--config", required=True, help="experiment config JSON")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--jobs", type=int, default=1, help="max parallel workers for iterations")
    p_run.add_argument("--seed", type=int, default=None, help="override the plan (and scenario) seed")
    p_run.set_defaults(func=_cmd_run)

    p_pca = sub.add_parser("pca", help="principal components of a binary-filtered dataset")
    p_pca.add_argument("--dataset", required=True, help="dataset CSV or JSON")
    p_pca.add_argument("--pair", nargs=2, required=True, metavar=("CLASS_A", "CLASS_B"))
    p_pca.add_argument("--k", type=int, default=2, choices=(1, 2, 3))
    p_pca.add_argument("--normalize", action="store_true", help="z-score rotations before fitting")
    p_pca.add_argument("--out", required=True, help="output directory")
    p_pca.set_defaults(func=_cmd_pca)

    p_diffs = sub.add_parser("diffs", help="per-subject head-movement profiles for one task")
    p_diffs.add_argument("--dataset", required=True, help="dataset CSV or JSON")
    p_diffs.add_argument("--task", required=True, help="task id, e.g. radio-on-off")
    p_diffs.add_argument("--target", required=True, help="target glance region, e.g. center-stack")
    p_diffs.add_argument("--range-mode", default="percentile", choices=("percentile", "minmax"))
    p_diffs.add_argument("--out", required=True, help="output directory")
    p_diffs.set_defaults(func=_cmd_diffs)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, HeadglanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # runtime failures keep a machine-parseable single line
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
