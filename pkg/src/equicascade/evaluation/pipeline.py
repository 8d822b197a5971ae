"""End-to-end experiment execution from a RunConfig.

``run_experiment`` drives the whole matrix: per fold it retrains the
ROI detectors from that fold's training subjects (leak-free by
construction), crops every sample through the requested provider, runs
each AU × family × region-level classifier job, writes per-fold
artifacts, and finally aggregates everything into report files.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..config import RunConfig
from ..data.aus import region_for
from ..data.folds import FoldSplit, make_subject_folds
from ..data.frames import FrameSample, load_frame_cache
from ..roi.boxes import BoundingBox, annotations_by_image, crop_and_normalize, load_box_annotations
from ..roi.cascade import FACE_SIDE, CascadeDetector
from ..roi.detector import RoiDetector
from ..seeding import derive_seed
from .experiment import (
    CascadeCropProvider,
    FoldJob,
    OracleCropProvider,
    run_fold,
)
from .metrics import FoldResult
from .report import build_report, render_report

logger = logging.getLogger(__name__)

DETECTORS_DIR = "detectors"


def detector_training_pairs(
    samples: list[FrameSample],
    boxes: dict[str, dict[str, BoundingBox]],
    kind: str,
) -> tuple[list[np.ndarray], list[BoundingBox]]:
    """(image, ground-truth box) pairs for one detector kind.

    The face detector trains on full frames.  Region detectors train on
    ground-truth face crops (side ``FACE_SIDE``) with the region box
    mapped into crop coordinates.
    """
    images: list[np.ndarray] = []
    gts: list[BoundingBox] = []
    for sample in samples:
        per_image = boxes.get(sample.clip_id, {})
        if kind == "face":
            if "face" in per_image:
                images.append(sample.image)
                gts.append(per_image["face"])
            continue
        if "face" not in per_image or kind not in per_image:
            continue
        crop, transform = crop_and_normalize(sample.image, per_image["face"], FACE_SIDE)
        images.append(crop)
        gts.append(transform.box_to_crop(per_image[kind]))
    return images, gts


def train_detector(
    kind: str,
    samples: list[FrameSample],
    boxes: dict[str, dict[str, BoundingBox]],
    seed: int,
    epochs: int = 40,
    batch_size: int = 8,
    learning_rate: float = 1e-3,
    confidence_threshold: float = 0.25,
    nms_iou: float = 0.45,
) -> RoiDetector:
    images, gts = detector_training_pairs(samples, boxes, kind)
    if not images:
        raise ValueError(f"no annotated samples to train the {kind} detector")
    det = RoiDetector(
        kind=kind,
        confidence_threshold=confidence_threshold,
        nms_iou=nms_iou,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        seed=seed,
    )
    det.fit(images, gts)
    return det


def cascade_kinds(aus: list[str], region_levels: list[str]) -> list[str]:
    """Detector kinds a cascade run needs for this experiment slice."""
    kinds: list[str] = []
    if "face" in region_levels or "region" in region_levels:
        kinds.append("face")
    if "region" in region_levels:
        for au in aus:
            kind = region_for(au)
            if kind not in kinds:
                kinds.append(kind)
    return kinds


def build_fold_cascade(
    config: RunConfig,
    fold: FoldSplit,
    samples: list[FrameSample],
    boxes: dict[str, dict[str, BoundingBox]],
    out_dir: Path | None,
) -> CascadeDetector | None:
    kinds = cascade_kinds(config.experiment.aus, config.experiment.region_levels)
    if not kinds:
        return None
    train_samples = [s for s in samples if s.subject_id in fold.train_subjects]
    det_cfg = config.detector
    detectors = {}
    for kind in kinds:
        seed = derive_seed(config.run.seed, "detector", f"fold{fold.fold_index}", kind)
        logger.info("training %s detector for fold %d (%d epochs)", kind, fold.fold_index, det_cfg.epochs)
        detectors[kind] = train_detector(
            kind,
            train_samples,
            boxes,
            seed,
            epochs=det_cfg.epochs,
            batch_size=det_cfg.batch_size,
            learning_rate=det_cfg.learning_rate,
            confidence_threshold=det_cfg.confidence_threshold,
            nms_iou=det_cfg.nms_iou,
        )
        if out_dir is not None:
            target = out_dir / DETECTORS_DIR / f"fold{fold.fold_index}"
            target.mkdir(parents=True, exist_ok=True)
            detectors[kind].save(target / f"{kind}.zip")
    return CascadeDetector(
        face=detectors["face"],
        eye=detectors.get("eye"),
        lower_face=detectors.get("lower_face"),
    )


def _load_inputs(config: RunConfig) -> tuple[list[FrameSample], dict[str, dict[str, BoundingBox]]]:
    cache_dir = config.resolve(config.data.frame_cache)
    samples = load_frame_cache(cache_dir)
    boxes_path = config.resolve(config.data.boxes)
    boxes = annotations_by_image(load_box_annotations(boxes_path)) if boxes_path else {}
    return samples, boxes


def run_fold_block(
    config: RunConfig,
    fold: FoldSplit,
    preloaded: tuple[list[FrameSample], dict] | None = None,
) -> list[FoldResult]:
    """All classifier jobs of one fold, including its detector training
    when the cascade provider is selected."""
    samples, boxes = preloaded if preloaded is not None else _load_inputs(config)
    out_dir = config.resolve(config.run.out)
    exp = config.experiment
    if exp.crop_source == "oracle":
        provider = OracleCropProvider(boxes)
    else:
        cascade = build_fold_cascade(config, fold, samples, boxes, out_dir)
        provider = CascadeCropProvider(cascade) if cascade else OracleCropProvider(boxes)
    clf_cfg = config.classifier
    params = {
        "epochs": clf_cfg.epochs,
        "batch_size": clf_cfg.batch_size,
        "learning_rate": clf_cfg.learning_rate,
        "patience": clf_cfg.patience,
        "threshold": clf_cfg.threshold,
    }
    results = []
    for au in exp.aus:
        for family in exp.families:
            for level in exp.region_levels:
                job = FoldJob(
                    fold=fold,
                    au=au,
                    family=family,
                    region_level=level,
                    seed=config.run.seed,
                    classifier_params=params,
                )
                result, _ = run_fold(job, samples, provider, out_dir=out_dir)
                results.append(result)
    return results


def _fold_block_worker(args: tuple[RunConfig, FoldSplit]) -> list[FoldResult]:
    config, fold = args
    return run_fold_block(config, fold)


def experiment_folds(config: RunConfig, samples: list[FrameSample]) -> list[FoldSplit]:
    subjects = sorted({s.subject_id for s in samples})
    folds = make_subject_folds(subjects)
    return [folds[i] for i in sorted(config.experiment.folds)]


def run_experiment(config: RunConfig):
    """Execute the configured matrix; returns (EvalReport, out_dir)."""
    out_dir = config.resolve(config.run.out)
    preloaded = _load_inputs(config)
    folds = experiment_folds(config, preloaded[0])
    jobs = config.experiment.jobs
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(_fold_block_worker, [(config, f) for f in folds]))
    else:
        blocks = [run_fold_block(config, fold, preloaded) for fold in folds]
    results = [r for block in blocks for r in block]
    report = build_report(results)
    render_report(report, out_dir / "report")
    return report, out_dir
