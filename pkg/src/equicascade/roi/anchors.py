"""Anchor priors via k-means over training box shapes with IoU distance.

Anchors are recomputed per detector because face and sub-region box
statistics differ drastically.  The six clusters are split by area: the
three smallest serve the stride-16 grid, the largest three the stride-32
grid.
"""
from __future__ import annotations

import numpy as np

from ..seeding import derive_rng


def wh_iou(wh: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Pairwise IoU of co-centered (w, h) shapes: (N, 2) x (K, 2) -> (N, K)."""
    inter = np.minimum(wh[:, None, 0], centers[None, :, 0]) * np.minimum(
        wh[:, None, 1], centers[None, :, 1]
    )
    union = (wh[:, 0] * wh[:, 1])[:, None] + (centers[:, 0] * centers[:, 1])[None, :] - inter
    return inter / union


def kmeans_anchors(box_wh: np.ndarray, k: int, seed: int, max_iter: int = 100) -> np.ndarray:
    """Cluster (N, 2) box shapes into k anchors using 1 - IoU distance.

    Returns (k, 2) anchors sorted by area.  Degenerate inputs (fewer
    distinct shapes than k) are handled by duplicating shapes.
    """
    wh = np.asarray(box_wh, dtype=np.float64)
    if wh.ndim != 2 or wh.shape[1] != 2 or len(wh) == 0:
        raise ValueError("box_wh must be a non-empty (N, 2) array")
    if np.any(wh <= 0):
        raise ValueError("box shapes must be positive")
    rng = derive_rng(seed, "anchors", k)
    if len(wh) < k:
        wh = wh[rng.integers(len(wh), size=k)] * rng.uniform(0.9, 1.1, size=(k, 2))
    centers = wh[rng.choice(len(wh), size=k, replace=False)].copy()
    assignment = np.full(len(wh), -1)
    for _ in range(max_iter):
        new_assignment = np.argmax(wh_iou(wh, centers), axis=1)
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for j in range(k):
            members = wh[assignment == j]
            if len(members):
                centers[j] = np.median(members, axis=0)
            else:
                centers[j] = wh[rng.integers(len(wh))]
    order = np.argsort(centers[:, 0] * centers[:, 1])
    return centers[order]


def two_scale_anchors(box_wh: np.ndarray, seed: int, per_scale: int = 3) -> dict[int, np.ndarray]:
    """Anchor sets for the stride-16 and stride-32 prediction grids."""
    anchors = kmeans_anchors(box_wh, 2 * per_scale, seed)
    return {16: anchors[:per_scale], 32: anchors[per_scale:]}
