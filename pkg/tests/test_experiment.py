"""Fold driver: crop providers, exclusivity guards, skips, artifacts."""

import json

import numpy as np
import pytest

from conftest import make_sample
from equicascade.data.balance import BalancedSet, SubjectLeakageError, build_binary_dataset
from equicascade.data.folds import make_subject_folds
from equicascade.evaluation.experiment import (
    CascadeCropProvider,
    FoldJob,
    OracleCropProvider,
    assert_fold_exclusive,
    fold_dir,
    load_fold_results,
    metrics_json_bytes,
    run_fold,
    split_samples,
)
from equicascade.evaluation.metrics import FoldResult
from equicascade.roi.boxes import BoundingBox
from equicascade.roi.cascade import CascadeMiss, RegionCrop

SUBJECTS = [f"s{i}" for i in range(8)]
FAST = {"epochs": 2, "batch_size": 8, "patience": 2}


def _samples(per_subject_pos=2, per_subject_neg=2, au="AU101"):
    samples = []
    for subject in SUBJECTS:
        for i in range(per_subject_pos):
            samples.append(make_sample(f"{subject}_pos{i}", subject, au, side=64, fill=200))
        for i in range(per_subject_neg):
            samples.append(make_sample(f"{subject}_neg{i}", subject, "AD160", side=64, fill=30))
    return samples


class BrightnessProvider:
    """Serves the sample image as its own 64px crop; optionally misses."""

    def __init__(self, miss_clips=()):
        self.miss_clips = set(miss_clips)

    def crop(self, sample, au, region_level):
        if sample.clip_id in self.miss_clips:
            raise CascadeMiss("eye")
        return sample.image


def test_split_samples_by_role():
    samples = _samples()
    fold = make_subject_folds(SUBJECTS)[0]
    split = split_samples(samples, fold)
    assert {s.subject_id for s in split["test"]} == {fold.test_subject}
    assert {s.subject_id for s in split["val"]} == {fold.val_subject}
    assert {s.subject_id for s in split["train"]} == set(fold.train_subjects)
    assert sum(len(v) for v in split.values()) == len(samples)


class TestOracleProvider:
    @pytest.fixture()
    def provider_and_sample(self, face_frames):
        image, boxes = face_frames[0]
        sample = make_sample("clip0", "s0", "AU101")
        sample = type(sample)(
            clip_id="clip0", frame_index=0, image=image, label="AU101", subject_id="s0"
        )
        return OracleCropProvider({"clip0": boxes}), sample

    def test_crop_sides_per_level(self, provider_and_sample):
        provider, sample = provider_and_sample
        assert provider.crop(sample, "AU101", "frame").shape == (176, 176, 3)
        assert provider.crop(sample, "AU101", "face").shape == (176, 176, 3)
        assert provider.crop(sample, "AU101", "region").shape == (64, 64, 3)
        assert provider.crop(sample, "AU25", "region").shape == (64, 64, 3)

    def test_missing_box_is_a_miss(self, provider_and_sample):
        provider, sample = provider_and_sample
        provider.boxes["clip0"] = {"face": provider.boxes["clip0"]["face"]}
        with pytest.raises(CascadeMiss):
            provider.crop(sample, "AU101", "region")
        other = type(sample)(
            clip_id="other", frame_index=0, image=sample.image, label="AU101", subject_id="s0"
        )
        with pytest.raises(CascadeMiss):
            provider.crop(other, "AU101", "face")


class RecordingCascade:
    def __init__(self, region_image):
        self.calls = []
        self._region_image = region_image

    def extract(self, frame, kind):
        self.calls.append(kind)
        side = 512 if kind == "face" else 64
        image = np.zeros((side, side, 3), dtype=np.uint8) if kind == "face" else self._region_image
        return RegionCrop(
            image=image,
            box_in_frame=BoundingBox(0, 0, 10, 10),
            face_box_in_frame=BoundingBox(0, 0, 10, 10),
            face_confidence=0.9,
            region_confidence=None if kind == "face" else 0.8,
        )


class TestCascadeProvider:
    def test_region_routing_by_au(self):
        cascade = RecordingCascade(np.zeros((64, 64, 3), dtype=np.uint8))
        provider = CascadeCropProvider(cascade)
        sample = make_sample("c", "s0", "AU101", side=128)
        assert provider.crop(sample, "AU101", "region").shape == (64, 64, 3)
        assert provider.crop(sample, "AU25", "region").shape == (64, 64, 3)
        assert cascade.calls == ["eye", "lower_face"]

    def test_face_level_resizes_to_frame_side(self):
        cascade = RecordingCascade(np.zeros((64, 64, 3), dtype=np.uint8))
        provider = CascadeCropProvider(cascade)
        sample = make_sample("c", "s0", "AU101", side=128)
        assert provider.crop(sample, "AU101", "face").shape == (176, 176, 3)
        assert cascade.calls == ["face"]

    def test_frame_level_skips_detectors(self):
        cascade = RecordingCascade(np.zeros((64, 64, 3), dtype=np.uint8))
        provider = CascadeCropProvider(cascade)
        sample = make_sample("c", "s0", "AU101", side=128)
        assert provider.crop(sample, "AU101", "frame").shape == (176, 176, 3)
        assert cascade.calls == []


class TestExclusivityGuard:
    def test_leaked_subject_raises(self):
        samples = _samples()
        fold = make_subject_folds(SUBJECTS)[0]
        sets = {
            split: build_binary_dataset(samples, "AU101", fold.subjects_for(split), 0, split=split)
            for split in ("train", "val", "test")
        }
        assert_fold_exclusive(fold, sets)  # clean case passes
        leaked = BalancedSet(
            positives=sets["test"].positives,  # test-subject samples
            negatives=sets["train"].negatives[: len(sets["test"].positives)],
            target_au="AU101",
            split="train",
        )
        with pytest.raises(SubjectLeakageError):
            assert_fold_exclusive(fold, {**sets, "train": leaked})


class TestRunFold:
    def _job(self, fold_index=0, **params):
        fold = make_subject_folds(SUBJECTS)[fold_index]
        merged = {**FAST, **params}
        return FoldJob(
            fold=fold, au="AU101", family="drml", region_level="region",
            seed=11, classifier_params=merged,
        )

    def test_completed_fold_with_artifacts(self, tmp_path):
        job = self._job()
        result, clf = run_fold(job, _samples(), BrightnessProvider(), out_dir=tmp_path)
        assert result.valid and clf is not None
        assert result.n_test == 4  # 2 positives + 2 negatives of the test subject
        target = fold_dir(tmp_path, result)
        assert (target / "metrics.json").exists()
        assert (target / "checkpoint.zip").exists()
        assert (target / "curve.csv").exists()
        payload = json.loads((target / "metrics.json").read_text())
        assert payload["au"] == "AU101" and payload["status"] == "ok"
        assert load_fold_results(tmp_path) == [result]

    def test_metrics_bytes_deterministic(self):
        result = FoldResult(0, "AU101", "drml", "region", 0.75, 0.7, 4)
        assert metrics_json_bytes(result) == metrics_json_bytes(result)
        decoded = json.loads(metrics_json_bytes(result))
        assert list(decoded) == sorted(decoded)

    def test_excess_misses_skip_fold(self, tmp_path):
        job = self._job()
        test_subject = job.fold.test_subject
        misses = {f"{test_subject}_pos0", f"{test_subject}_pos1", f"{test_subject}_neg0"}
        result, clf = run_fold(job, _samples(), BrightnessProvider(misses), out_dir=tmp_path)
        assert clf is None and not result.valid
        assert "cascade misses" in result.status
        target = fold_dir(tmp_path, result)
        assert (target / "metrics.json").exists()
        assert not (target / "checkpoint.zip").exists()

    def test_tolerated_misses_still_complete(self):
        job = self._job()
        test_subject = job.fold.test_subject
        result, clf = run_fold(
            job, _samples(), BrightnessProvider({f"{test_subject}_pos0"})
        )
        assert result.valid
        assert result.n_test == 2  # one positive left -> one negative drawn

    def test_no_positives_skips_with_reason(self):
        job = self._job()
        samples = [
            s for s in _samples()
            if not (s.subject_id == job.fold.test_subject and s.label == "AU101")
        ]
        result, clf = run_fold(job, samples, BrightnessProvider())
        assert clf is None and not result.valid
        assert result.status.startswith("skipped:")
        assert "positive" in result.status

    def test_results_reload_matches(self, tmp_path):
        job0 = self._job(0)
        job1 = self._job(1)
        r0, _ = run_fold(job0, _samples(), BrightnessProvider(), out_dir=tmp_path)
        r1, _ = run_fold(job1, _samples(), BrightnessProvider(), out_dir=tmp_path)
        assert load_fold_results(tmp_path) == sorted([r0, r1], key=lambda r: r.fold_index)
