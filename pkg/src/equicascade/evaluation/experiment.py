"""Fold-level experiment driver.

One fold job: split frame samples by subject role, turn them into
region crops (ground-truth boxes or the trained detector cascade),
build exactly balanced binary sets per split, train the classifier with
best-validation-F1 checkpointing, and score the held-out subject.
Subject exclusivity is asserted at every stage; violations raise, they
are never warnings.

Results land under ``<out>/results/<au>/<family>/<region_level>/fold<i>/``
as ``metrics.json`` (always), plus ``checkpoint.zip`` and ``curve.csv``
for completed folds.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from ..data.aus import region_for
from ..data.balance import BalancedSet, BalanceError, build_binary_dataset, check_balanced, check_subjects
from ..data.folds import FoldSplit
from ..data.frames import FrameSample
from ..models.classifier import AUClassifier
from ..models.networks import FRAME_SIDE, REGION_SIDE
from ..roi.boxes import BoundingBox, CropTransform, crop_and_normalize, resize_square
from ..roi.cascade import CascadeDetector, CascadeMiss
from ..seeding import derive_seed
from .metrics import FoldResult, binary_metrics, skipped_fold

logger = logging.getLogger(__name__)

METRICS_NAME = "metrics.json"
CURVE_NAME = "curve.csv"
CHECKPOINT_NAME = "checkpoint.zip"
MISS_LIMIT = 0.5  # fold invalid when more than this fraction of a split is lost


class CropProvider(Protocol):
    """Maps a frame sample to the classifier input for one AU/level."""

    def crop(self, sample: FrameSample, au: str, region_level: str) -> np.ndarray: ...


def _frame_crop(sample: FrameSample) -> np.ndarray:
    crop, _ = crop_and_normalize(sample.image, None, FRAME_SIDE)
    return crop


class OracleCropProvider:
    """Crops straight from ground-truth boxes (no detectors involved).

    ``boxes`` maps clip_id -> kind -> box, as loaded from a box
    annotation file.
    """

    def __init__(self, boxes: dict[str, dict[str, BoundingBox]]):
        self.boxes = boxes

    def _box(self, sample: FrameSample, kind: str) -> BoundingBox:
        try:
            return self.boxes[sample.clip_id][kind]
        except KeyError:
            raise CascadeMiss(kind, f"no ground-truth {kind} box for {sample.clip_id}")

    def crop_with_transform(
        self, sample: FrameSample, au: str, region_level: str
    ) -> tuple[np.ndarray, CropTransform]:
        if region_level == "frame":
            return crop_and_normalize(sample.image, None, FRAME_SIDE)
        if region_level == "face":
            return crop_and_normalize(sample.image, self._box(sample, "face"), FRAME_SIDE)
        kind = region_for(au)
        return crop_and_normalize(sample.image, self._box(sample, kind), REGION_SIDE)

    def crop(self, sample: FrameSample, au: str, region_level: str) -> np.ndarray:
        return self.crop_with_transform(sample, au, region_level)[0]


class CascadeCropProvider:
    """Crops through the trained detector cascade; raises CascadeMiss
    when a stage finds nothing."""

    def __init__(self, cascade: CascadeDetector):
        self.cascade = cascade

    def crop(self, sample: FrameSample, au: str, region_level: str) -> np.ndarray:
        if region_level == "frame":
            return _frame_crop(sample)
        if region_level == "face":
            face = self.cascade.extract(sample.image, "face").image
            return resize_square(face, FRAME_SIDE)
        return self.cascade.extract(sample.image, region_for(au)).image


def split_samples(samples: list[FrameSample], fold: FoldSplit) -> dict[str, list[FrameSample]]:
    out: dict[str, list[FrameSample]] = {"train": [], "val": [], "test": []}
    for sample in samples:
        out[fold.role_of(sample.subject_id)].append(sample)
    return out


def assert_fold_exclusive(fold: FoldSplit, sets: dict[str, BalancedSet]) -> None:
    """Hard guard: no sample of the test subject in train or val, no
    val-subject sample in train."""
    check_subjects(sets["train"], fold.train_subjects)
    check_subjects(sets["val"], {fold.val_subject})
    check_subjects(sets["test"], {fold.test_subject})


@dataclass
class FoldJob:
    fold: FoldSplit
    au: str
    family: str
    region_level: str
    seed: int
    classifier_params: dict | None = None

    def describe(self) -> str:
        return f"{self.au}/{self.family}/{self.region_level}/fold{self.fold.fold_index}"


def run_fold(
    job: FoldJob,
    samples: list[FrameSample],
    provider: CropProvider,
    out_dir: Path | None = None,
) -> tuple[FoldResult, AUClassifier | None]:
    """Execute one fold job; returns its result and the trained model
    (None when the fold is skipped)."""
    fold, au = job.fold, job.au

    def _skip(reason: str) -> tuple[FoldResult, None]:
        logger.warning("%s %s", job.describe(), reason)
        result = skipped_fold(fold.fold_index, au, job.family, job.region_level, reason)
        if out_dir is not None:
            write_fold_artifacts(result, None, out_dir)
        return result, None

    crops: dict[tuple[str, int], np.ndarray] = {}
    survivors: dict[str, list[FrameSample]] = {}
    for split, members in split_samples(samples, fold).items():
        kept = []
        misses = 0
        for sample in members:
            try:
                crops[(sample.clip_id, sample.frame_index)] = provider.crop(sample, au, job.region_level)
            except CascadeMiss as miss:
                misses += 1
                logger.debug("%s cascade miss (%s) on %s", job.describe(), miss.stage, sample.clip_id)
                continue
            kept.append(sample)
        if members and misses / len(members) > MISS_LIMIT:
            return _skip(f"skipped: cascade misses on {misses}/{len(members)} {split} samples")
        survivors[split] = kept

    subjects = {"train": fold.train_subjects, "val": {fold.val_subject}, "test": {fold.test_subject}}
    sets: dict[str, BalancedSet] = {}
    try:
        for split, members in survivors.items():
            sets[split] = build_binary_dataset(members, au, subjects[split], job.seed, split=split)
    except BalanceError as err:
        return _skip(f"skipped: {err}")
    for balanced in sets.values():
        check_balanced(balanced)
    assert_fold_exclusive(fold, sets)

    def _arrays(balanced: BalancedSet) -> tuple[np.ndarray, np.ndarray]:
        X = np.stack([crops[(s.clip_id, s.frame_index)] for s in balanced.samples])
        return X, np.asarray(balanced.labels, dtype=np.int64)

    X_train, y_train = _arrays(sets["train"])
    X_val, y_val = _arrays(sets["val"])
    X_test, y_test = _arrays(sets["test"])

    params = dict(job.classifier_params or {})
    clf = AUClassifier(
        family=job.family,
        region_level=job.region_level,
        seed=derive_seed(job.seed, "fold", str(fold.fold_index), au, job.family, job.region_level),
        **params,
    )
    clf.fit(X_train, y_train, X_val, y_val)
    accuracy, f1 = binary_metrics(clf.predict(X_test).tolist(), y_test.tolist())
    result = FoldResult(
        fold_index=fold.fold_index,
        au=au,
        family=job.family,
        region_level=job.region_level,
        accuracy=accuracy,
        f1=f1,
        n_test=len(y_test),
    )
    logger.info("%s acc %.3f f1 %.3f (n_test %d)", job.describe(), accuracy, f1, result.n_test)
    if out_dir is not None:
        write_fold_artifacts(result, clf, out_dir)
    return result, clf


def fold_dir(out_dir, result_or_job) -> Path:
    r = result_or_job
    fold_index = r.fold_index if isinstance(r, FoldResult) else r.fold.fold_index
    return Path(out_dir) / "results" / r.au / r.family / r.region_level / f"fold{fold_index}"


def metrics_json_bytes(result: FoldResult) -> bytes:
    payload = {
        "fold_index": result.fold_index,
        "au": result.au,
        "family": result.family,
        "region_level": result.region_level,
        "accuracy": result.accuracy,
        "f1": result.f1,
        "n_test": result.n_test,
        "status": result.status,
    }
    return (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode()


def write_fold_artifacts(result: FoldResult, clf: AUClassifier | None, out_dir) -> Path:
    target = fold_dir(out_dir, result)
    target.mkdir(parents=True, exist_ok=True)
    (target / METRICS_NAME).write_bytes(metrics_json_bytes(result))
    if clf is not None:
        clf.save(target / CHECKPOINT_NAME)
        clf.save_curve(target / CURVE_NAME)
    return target


def load_fold_results(out_dir) -> list[FoldResult]:
    """Collect every metrics.json under <out>/results, sorted by path."""
    root = Path(out_dir) / "results"
    results = []
    for path in sorted(root.glob("*/*/*/fold*/" + METRICS_NAME)):
        payload = json.loads(path.read_text())
        results.append(FoldResult(**payload))
    return results
