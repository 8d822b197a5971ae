"""Anchor clustering: shape IoU, k-means behaviour, two-scale split."""

import numpy as np
import pytest

from equicascade.roi.anchors import kmeans_anchors, two_scale_anchors, wh_iou


def test_wh_iou_identical_shapes():
    wh = np.array([[10.0, 20.0], [5.0, 5.0]])
    out = wh_iou(wh, wh)
    assert out.shape == (2, 2)
    assert np.allclose(np.diag(out), 1.0)


def test_wh_iou_hand_computed():
    # 4x4 vs 2x8 co-centered: inter = min(4,2)*min(4,8) = 8, union = 16+16-8.
    out = wh_iou(np.array([[4.0, 4.0]]), np.array([[2.0, 8.0]]))
    assert out[0, 0] == pytest.approx(8.0 / 24.0)


def test_wh_iou_nested_shapes():
    # Smaller box fully inside: IoU is the area ratio.
    out = wh_iou(np.array([[2.0, 2.0]]), np.array([[4.0, 4.0]]))
    assert out[0, 0] == pytest.approx(4.0 / 16.0)


def test_kmeans_recovers_separated_clusters():
    rng = np.random.default_rng(42)
    small = rng.uniform(8, 12, size=(60, 2))
    large = rng.uniform(80, 120, size=(60, 2))
    anchors = kmeans_anchors(np.vstack([small, large]), k=2, seed=0)
    assert anchors.shape == (2, 2)
    # Sorted by area: first anchor near the small blob, second near the large.
    assert np.all(anchors[0] < 20)
    assert np.all(anchors[1] > 60)


def test_kmeans_sorted_by_area():
    rng = np.random.default_rng(1)
    wh = rng.uniform(5, 200, size=(300, 2))
    anchors = kmeans_anchors(wh, k=6, seed=3)
    areas = anchors[:, 0] * anchors[:, 1]
    assert np.all(np.diff(areas) >= 0)


def test_kmeans_deterministic_per_seed():
    rng = np.random.default_rng(2)
    wh = rng.uniform(5, 200, size=(100, 2))
    a = kmeans_anchors(wh, k=6, seed=7)
    b = kmeans_anchors(wh, k=6, seed=7)
    assert np.array_equal(a, b)


def test_kmeans_fewer_shapes_than_clusters():
    anchors = kmeans_anchors(np.array([[30.0, 40.0]]), k=6, seed=0)
    assert anchors.shape == (6, 2)
    assert np.all(anchors > 0)


def test_kmeans_input_validation():
    with pytest.raises(ValueError):
        kmeans_anchors(np.zeros((0, 2)), k=3, seed=0)
    with pytest.raises(ValueError):
        kmeans_anchors(np.array([[1.0, -2.0]]), k=1, seed=0)
    with pytest.raises(ValueError):
        kmeans_anchors(np.array([1.0, 2.0, 3.0]), k=1, seed=0)


def test_two_scale_split_by_area():
    rng = np.random.default_rng(9)
    wh = np.vstack([rng.uniform(10, 40, size=(80, 2)), rng.uniform(100, 250, size=(80, 2))])
    scales = two_scale_anchors(wh, seed=0)
    assert set(scales) == {16, 32}
    assert scales[16].shape == (3, 2) and scales[32].shape == (3, 2)
    fine_areas = scales[16][:, 0] * scales[16][:, 1]
    coarse_areas = scales[32][:, 0] * scales[32][:, 1]
    # The fine (stride-16) grid takes the three smallest shapes.
    assert fine_areas.max() <= coarse_areas.min()


def test_anchors_represent_training_shapes():
    # Every training shape should have decent IoU with its closest anchor.
    rng = np.random.default_rng(4)
    wh = np.exp(rng.uniform(np.log(20), np.log(300), size=(400, 2)))
    scales = two_scale_anchors(wh, seed=0)
    anchors = np.vstack([scales[16], scales[32]])
    best = wh_iou(wh, anchors).max(axis=1)
    assert best.mean() > 0.55
