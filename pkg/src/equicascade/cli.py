"""Command-line entry point.

Subcommands cover the pipeline end to end: synth-gen, ingest,
sample-frames, train-detector, cascade-crop, train-au, evaluate,
saliency, report.  Every subcommand accepts --config/--seed/--out;
flags override config-file values, and EQUICASCADE_OUT provides the
default output root.  Exit codes: 0 success, 1 validation/runtime
failure (with one machine-parsable ``error: ...`` line per violation on
stderr), 2 usage errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

OUT_ENV = "EQUICASCADE_OUT"
logger = logging.getLogger(__name__)


class CommandError(RuntimeError):
    """Failure with one or more operator-facing error lines."""

    def __init__(self, *lines: str):
        self.lines = list(lines)
        super().__init__(lines[0] if lines else "command failed")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML or JSON experiment config")
    parser.add_argument("--seed", type=int, help="overrides run.seed from the config")
    parser.add_argument("--out", help=f"output root (default: run.out or ${OUT_ENV})")
    parser.add_argument("--force", action="store_true", help="allow writing into non-empty outputs")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def _load(args) -> "RunConfig":
    from .config import RunConfig, load_config

    config = load_config(args.config) if args.config else RunConfig(base_dir=Path.cwd())
    if args.seed is not None:
        config.run.seed = args.seed
    if args.out is not None:
        config.run.out = args.out
    elif config.run.out is None and os.environ.get(OUT_ENV):
        config.run.out = os.environ[OUT_ENV]
    violations = config.validate()
    if violations:
        raise CommandError(*violations)
    return config


def _require(config, *fields: str) -> None:
    violations = config.require(*fields)
    if violations:
        raise CommandError(*violations)


def _fresh_dir(path: Path, force: bool) -> Path:
    """Refuse to write into an existing non-empty directory without --force."""
    if path.exists() and any(path.iterdir()) and not force:
        raise CommandError(f"output {path} is not empty; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _out_dir(config, args, *subdirs: str) -> Path:
    _require(config, "run.out")
    path = config.resolve(config.run.out)
    for sub in subdirs:
        path = path / sub
    return _fresh_dir(path, args.force)


# -- subcommand handlers ----------------------------------------------------


def cmd_synth_gen(args) -> int:
    from .synth import SynthSpec, generate_corpus

    config = _load(args)
    syn = config.synth
    spec = SynthSpec(
        image_size=syn.image_size,
        face_scale=tuple(syn.face_scale),
        aus=tuple(syn.aus),
        contrast=syn.contrast,
    )
    out = _out_dir(config, args)
    paths = generate_corpus(spec, syn.n_per_class, config.run.seed, out)
    print(f"wrote corpus: {paths['manifest']}")
    return 0


def cmd_ingest(args) -> int:
    from .data.aus import class_counts, select_classes
    from .data.manifest import load_manifest

    config = _load(args)
    _require(config, "data.manifest")
    manifest = load_manifest(config.resolve(config.data.manifest))
    counts = class_counts(manifest)
    summary = {
        "n_clips": len(manifest),
        "n_subjects": len({c.subject_id for c in manifest}),
        "class_counts": dict(sorted(counts.items())),
        "selected_classes": list(select_classes(counts)),
    }
    out = _out_dir(config, args)
    (out / "ingest.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"ingested {summary['n_clips']} clips, {summary['n_subjects']} subjects")
    return 0


def cmd_sample_frames(args) -> int:
    from .data.frames import sample_frames, save_frame_cache, write_skip_report
    from .data.manifest import load_manifest
    from .data.video import ImageClipReader

    config = _load(args)
    _require(config, "data.manifest", "data.media_root")
    manifest = load_manifest(config.resolve(config.data.manifest))
    reader = ImageClipReader(config.resolve(config.data.media_root))
    samples, skips = sample_frames(manifest, reader, config.run.seed)
    out = _out_dir(config, args)
    save_frame_cache(samples, out)
    write_skip_report(skips, out / "skips.jsonl")
    print(f"cached {len(samples)} frames ({len(skips)} skipped) under {out}")
    return 0


def cmd_train_detector(args) -> int:
    from .data.frames import load_frame_cache
    from .evaluation.pipeline import train_detector
    from .roi.boxes import annotations_by_image, load_box_annotations

    config = _load(args)
    _require(config, "data.frame_cache", "data.boxes")
    samples = load_frame_cache(config.resolve(config.data.frame_cache))
    if args.subjects:
        keep = set(args.subjects.split(","))
        samples = [s for s in samples if s.subject_id in keep]
    boxes = annotations_by_image(load_box_annotations(config.resolve(config.data.boxes)))
    det_cfg = config.detector
    det = train_detector(
        args.kind,
        samples,
        boxes,
        config.run.seed,
        epochs=det_cfg.epochs,
        batch_size=det_cfg.batch_size,
        learning_rate=det_cfg.learning_rate,
        confidence_threshold=det_cfg.confidence_threshold,
        nms_iou=det_cfg.nms_iou,
    )
    out = _out_dir(config, args, "detectors")
    det.save(out / f"{args.kind}.zip")
    with open(out / f"{args.kind}_loss.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        writer.writerows(enumerate(det.loss_curve_))
    print(f"trained {args.kind} detector on {len(samples)} frames -> {out / (args.kind + '.zip')}")
    return 0


def cmd_cascade_crop(args) -> int:
    from .data.frames import FrameSample, SkipRecord, load_frame_cache, save_frame_cache, write_skip_report
    from .roi.cascade import CascadeDetector, CascadeMiss
    from .roi.detector import RoiDetector

    config = _load(args)
    _require(config, "data.frame_cache")
    det_dir = Path(args.detectors)
    loaded = {}
    for kind in ("face", "eye", "lower_face"):
        path = det_dir / f"{kind}.zip"
        if path.is_file():
            loaded[kind] = RoiDetector.load(path)
    if "face" not in loaded:
        raise CommandError(f"no face detector checkpoint under {det_dir}")
    cascade = CascadeDetector(
        face=loaded["face"], eye=loaded.get("eye"), lower_face=loaded.get("lower_face")
    )
    samples = load_frame_cache(config.resolve(config.data.frame_cache))
    out = _out_dir(config, args)
    kinds = args.kinds.split(",") if args.kinds else ["face"] + sorted(cascade.regions)
    for kind in kinds:
        crops, misses = [], []
        for sample in samples:
            try:
                crop = cascade.extract(sample.image, kind).image
            except CascadeMiss as miss:
                misses.append(SkipRecord(clip_id=sample.clip_id, reason=f"miss at {miss.stage}"))
                continue
            crops.append(
                FrameSample(
                    clip_id=sample.clip_id,
                    frame_index=sample.frame_index,
                    image=crop,
                    label=sample.label,
                    subject_id=sample.subject_id,
                )
            )
        kind_dir = out / kind
        kind_dir.mkdir(parents=True, exist_ok=True)
        save_frame_cache(crops, kind_dir)
        write_skip_report(misses, kind_dir / "misses.jsonl")
        print(f"{kind}: {len(crops)} crops, {len(misses)} misses")
    return 0


def cmd_train_au(args) -> int:
    from .data.folds import make_subject_folds
    from .evaluation.experiment import FoldJob, OracleCropProvider, run_fold
    from .evaluation.pipeline import _load_inputs, build_fold_cascade
    from .evaluation.experiment import CascadeCropProvider

    config = _load(args)
    _require(config, "data.frame_cache", "run.out")
    samples, boxes = _load_inputs(config)
    folds = make_subject_folds(sorted({s.subject_id for s in samples}))
    fold = folds[args.fold]
    out_dir = config.resolve(config.run.out)
    if config.experiment.crop_source == "oracle":
        provider = OracleCropProvider(boxes)
    else:
        cascade = build_fold_cascade(config, fold, samples, boxes, out_dir)
        provider = CascadeCropProvider(cascade) if cascade else OracleCropProvider(boxes)
    clf_cfg = config.classifier
    job = FoldJob(
        fold=fold,
        au=args.au,
        family=args.family,
        region_level=args.level,
        seed=config.run.seed,
        classifier_params={
            "epochs": clf_cfg.epochs,
            "batch_size": clf_cfg.batch_size,
            "learning_rate": clf_cfg.learning_rate,
            "patience": clf_cfg.patience,
            "threshold": clf_cfg.threshold,
        },
    )
    result, _ = run_fold(job, samples, provider, out_dir=out_dir)
    print(f"{job.describe()}: {result.status}, acc {result.accuracy:.3f}, f1 {result.f1:.3f}")
    return 0


def cmd_evaluate(args) -> int:
    from .evaluation.pipeline import run_experiment

    config = _load(args)
    _require(config, "data.frame_cache", "run.out")
    _fresh_dir(config.resolve(config.run.out), args.force)
    report, out_dir = run_experiment(config)
    print(f"evaluated {len(report.folds)} fold jobs -> {out_dir / 'report'}")
    return 0


def cmd_saliency(args) -> int:
    from .data.frames import load_frame_cache
    from .evaluation.experiment import OracleCropProvider
    from .models.classifier import AUClassifier
    from .roi.boxes import annotations_by_image, load_box_annotations
    from .saliency import emit_grid, grad_cam, overlay, saliency_filename
    from PIL import Image

    config = _load(args)
    _require(config, "data.frame_cache", "data.boxes")
    clf = AUClassifier.load(args.checkpoint)
    samples = [s for s in load_frame_cache(config.resolve(config.data.frame_cache)) if s.label == args.au]
    if not samples:
        raise CommandError(f"no {args.au} positives in the frame cache")
    samples = samples[: args.limit]
    boxes = annotations_by_image(load_box_annotations(config.resolve(config.data.boxes)))
    provider = OracleCropProvider(boxes)
    out = _out_dir(config, args, "saliency")
    panels = []
    for sample in samples:
        crop = provider.crop(sample, args.au, clf.region_level)
        sal = grad_cam(clf, crop)
        image = overlay(sal, crop)
        name = saliency_filename(args.au, clf.family, clf.region_level, sample.clip_id)
        Image.fromarray(image).save(out / name, format="PNG")
        panels.append(image)
    emit_grid(
        [panels],
        out / "grid.png",
        row_labels=[f"{clf.family}/{clf.region_level}"],
        col_labels=[s.clip_id for s in samples],
    )
    print(f"wrote {len(panels)} overlays under {out}")
    return 0


def cmd_report(args) -> int:
    from .evaluation.experiment import load_fold_results
    from .evaluation.report import build_report, render_report

    config = _load(args)
    results_dir = Path(args.results) if args.results else config.resolve(config.run.out)
    if results_dir is None:
        raise CommandError("pass --results or configure run.out")
    results = load_fold_results(results_dir)
    if not results:
        raise CommandError(f"no fold results under {results_dir}")
    report = build_report(results)
    target = results_dir / "report"
    if target.exists() and any(target.iterdir()) and not args.force:
        raise CommandError(f"output {target} is not empty; pass --force to overwrite")
    paths = render_report(report, target)
    print(f"report over {len(report.folds)} fold jobs -> {paths[0]}")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="equicascade",
        description="Cascaded ROI detection and per-AU binary classification pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(func=func)
        return p

    add("synth-gen", cmd_synth_gen, "generate a synthetic corpus with exact ground truth")
    add("ingest", cmd_ingest, "validate a manifest and summarize class counts")
    add("sample-frames", cmd_sample_frames, "sample one frame per clip into a cache")
    p = add("train-detector", cmd_train_detector, "train one ROI detector")
    p.add_argument("--kind", required=True, choices=("face", "eye", "lower_face"))
    p.add_argument("--subjects", help="comma-separated subject whitelist")
    p = add("cascade-crop", cmd_cascade_crop, "run the cascade over a frame cache and save crops")
    p.add_argument("--detectors", required=True, help="directory with <kind>.zip checkpoints")
    p.add_argument("--kinds", help="comma-separated crop kinds (default: all available)")
    p = add("train-au", cmd_train_au, "train one AU classifier fold")
    p.add_argument("--au", required=True)
    p.add_argument("--family", required=True, choices=("drml", "alexnet"))
    p.add_argument("--level", required=True, choices=("frame", "face", "region"))
    p.add_argument("--fold", type=int, required=True)
    add("evaluate", cmd_evaluate, "run the full fold/AU/family matrix and report")
    p = add("saliency", cmd_saliency, "Grad-CAM overlays for a trained classifier")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--au", required=True)
    p.add_argument("--limit", type=int, default=8)
    p = add("report", cmd_report, "aggregate fold metrics into report files")
    p.add_argument("--results", help="results root (default: run.out)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    from .config import ConfigError

    try:
        return args.func(args)
    except CommandError as err:
        for line in err.lines:
            print(f"error: {line}", file=sys.stderr)
        return 1
    except ConfigError as err:
        for line in err.violations:
            print(f"error: {line}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError, KeyError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        logger.debug("traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
