"""Synthetic corpus: ground-truth boxes, glyph locality, determinism."""

import numpy as np
import pytest

from equicascade.data.aus import IN_SCOPE_CODES, NEUTRAL_CODE, region_for
from equicascade.data.manifest import load_manifest
from equicascade.roi.boxes import BoundingBox, annotations_by_image, load_box_annotations
from equicascade.synth import (
    SynthSpec,
    corpus_clips,
    feature_box,
    generate_corpus,
    generate_frame,
    null_variant,
    render_au_feature,
)

ALL_AUS = tuple(sorted(IN_SCOPE_CODES))


class TestSpecValidation:
    def test_default_is_valid(self):
        SynthSpec().validate()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"image_size": 32},
            {"face_scale": (0.0, 0.5)},
            {"face_scale": (0.6, 0.4)},
            {"face_scale": (0.5, 1.2)},
            {"contrast": "medium"},
            {"aus": ("AU101", "AU999")},
            {"n_subjects": 0},
        ],
    )
    def test_rejections(self, kwargs):
        with pytest.raises(ValueError):
            SynthSpec(**kwargs).validate()


class TestClips:
    def test_counts_and_labels(self):
        spec = SynthSpec(aus=("AU101", "AU25"))
        clips = corpus_clips(spec, n_per_class=8)
        assert len(clips) == 2 * 2 * 8
        for au in spec.aus:
            mine = [c for c in clips if c.clip_id.startswith(au)]
            assert sum(c.au == au for c in mine) == 8
            assert sum(c.au == NEUTRAL_CODE for c in mine) == 8

    def test_subjects_round_robin(self):
        clips = corpus_clips(SynthSpec(aus=("AU101",)), n_per_class=8)
        positives = [c for c in clips if c.au == "AU101"]
        assert [c.subject_id for c in positives] == [f"s{i}" for i in range(8)]

    def test_ids_unique_and_uris_consistent(self):
        clips = corpus_clips(SynthSpec(), n_per_class=3)
        assert len({c.clip_id for c in clips}) == len(clips)
        assert all(c.video_uri == f"frames/{c.clip_id}.png" for c in clips)

    def test_zero_per_class_rejected(self):
        with pytest.raises(ValueError):
            corpus_clips(SynthSpec(), 0)


def _frame(label, au="AU101", size=256, seed=11, contrast="easy"):
    spec = SynthSpec(image_size=size, aus=(au,), contrast=contrast)
    return generate_frame(spec, seed, "clip_000", "s0", label)


class TestFrames:
    def test_shape_and_dtype(self):
        image, _ = _frame("AU101", size=128)
        assert image.shape == (128, 128, 3)
        assert image.dtype == np.uint8

    def test_deterministic(self):
        a, boxes_a = _frame("AU101")
        b, boxes_b = _frame("AU101")
        assert np.array_equal(a, b)
        assert boxes_a == boxes_b

    def test_distinct_across_clips_and_subjects(self):
        spec = SynthSpec(image_size=128, aus=("AU101",))
        base, _ = generate_frame(spec, 11, "clip_000", "s0", "AU101")
        other_clip, _ = generate_frame(spec, 11, "clip_001", "s0", "AU101")
        other_subject, _ = generate_frame(spec, 11, "clip_000", "s1", "AU101")
        assert not np.array_equal(base, other_clip)
        assert not np.array_equal(base, other_subject)

    def test_box_hierarchy(self):
        image, boxes = _frame("AU101")
        face = boxes["face"]
        assert 0 <= face.x_min < face.x_max <= image.shape[1]
        assert 0 <= face.y_min < face.y_max <= image.shape[0]
        for kind in ("eye", "lower_face"):
            inner = boxes[kind]
            assert inner.x_min > face.x_min and inner.x_max < face.x_max
            assert inner.y_min > face.y_min and inner.y_max < face.y_max

    def test_positive_records_feature_box(self):
        _, boxes = _frame("AU101")
        assert boxes["AU101"] == feature_box(boxes["eye"], "AU101")

    def test_negative_has_no_feature_box(self):
        _, boxes = _frame(NEUTRAL_CODE)
        assert "AU101" not in boxes


@pytest.mark.parametrize("au", ALL_AUS)
def test_glyph_differences_stay_inside_owning_region(au):
    """Positive vs neutral frames differ (there is signal to learn) and
    the differing pixels sit inside the AU's region box."""
    pos, boxes = _frame(au, au=au)
    neg, _ = _frame(NEUTRAL_CODE, au=au)
    changed = np.any(pos != neg, axis=2)
    assert changed.sum() > 0
    region = boxes[region_for(au)]
    ys, xs = np.nonzero(changed)
    inside = (
        (xs >= np.floor(region.x_min))
        & (xs <= np.ceil(region.x_max))
        & (ys >= np.floor(region.y_min))
        & (ys <= np.ceil(region.y_max))
    )
    assert inside.mean() >= 0.95


class TestNullVariant:
    def test_contrast_flipped_only(self):
        spec = SynthSpec(aus=("AU101",), image_size=128)
        null = null_variant(spec)
        assert null.contrast == "null"
        assert null.aus == spec.aus and null.image_size == spec.image_size

    def test_labels_carry_no_pixels(self):
        pos, boxes = _frame("AU101", contrast="null")
        neg, _ = _frame(NEUTRAL_CODE, contrast="null")
        assert np.array_equal(pos, neg)
        assert "AU101" not in boxes


class TestFeatureBox:
    def test_hand_case(self):
        box = feature_box(BoundingBox(0, 0, 100, 50), "AU145")  # anchor (.5, .5)
        assert box == BoundingBox(37.5, 12.5, 62.5, 37.5)

    def test_unknown_au(self):
        canvas = np.zeros((64, 64, 3), dtype=np.uint8)
        with pytest.raises(ValueError, match="glyph"):
            render_au_feature(
                canvas, BoundingBox(0, 0, 64, 64), "AU999", True, np.random.default_rng(0)
            )


class TestCorpus:
    SPEC = SynthSpec(image_size=64, aus=("AU101", "AU25"))

    def test_layout_and_contents(self, tmp_path):
        paths = generate_corpus(self.SPEC, n_per_class=2, seed=5, out_dir=tmp_path)
        clips = load_manifest(paths["manifest"])
        assert len(clips) == 8
        annos = annotations_by_image(load_box_annotations(paths["boxes"]))
        for clip in clips:
            frame_path = paths["frames"] / f"{clip.clip_id}.png"
            assert frame_path.is_file()
            kinds = set(annos[clip.clip_id])
            assert {"face", "eye", "lower_face"} <= kinds
            assert (clip.au in kinds) == (clip.au != NEUTRAL_CODE)

    def test_byte_identical_reruns(self, tmp_path):
        first = generate_corpus(self.SPEC, n_per_class=2, seed=5, out_dir=tmp_path / "a")
        second = generate_corpus(self.SPEC, n_per_class=2, seed=5, out_dir=tmp_path / "b")
        assert first["manifest"].read_bytes() == second["manifest"].read_bytes()
        assert first["boxes"].read_bytes() == second["boxes"].read_bytes()
        for png in sorted(first["frames"].iterdir()):
            assert png.read_bytes() == (second["frames"] / png.name).read_bytes()

    def test_seed_changes_pixels(self, tmp_path):
        spec = SynthSpec(image_size=64, aus=("AU101",))
        first = generate_corpus(spec, 1, seed=5, out_dir=tmp_path / "a")
        second = generate_corpus(spec, 1, seed=6, out_dir=tmp_path / "b")
        names = [p.name for p in sorted(first["frames"].iterdir())]
        assert any(
            (first["frames"] / n).read_bytes() != (second["frames"] / n).read_bytes()
            for n in names
        )
