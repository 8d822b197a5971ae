"""Input validation helpers shared by the estimators."""
from __future__ import annotations

import numpy as np


def check_image(image: np.ndarray) -> np.ndarray:
    """Validate a single RGB image: (H, W, 3) uint8 with H, W >= 1."""
    if not isinstance(image, np.ndarray):
        raise TypeError(f"image must be a numpy array, got {type(image).__name__}")
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"image must have shape (H, W, 3), got {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ValueError(f"image has empty spatial extent: {image.shape}")
    if image.dtype != np.uint8:
        raise ValueError(f"image must be uint8, got {image.dtype}")
    return image


def check_image_batch(images) -> list[np.ndarray]:
    """Validate a sequence of RGB images (sizes may differ)."""
    if len(images) == 0:
        raise ValueError("empty image batch")
    return [check_image(img) for img in images]


def check_box(box) -> None:
    """Validate a bounding box object (construction already enforces
    geometry; this guards against passing raw tuples)."""
    for attr in ("x_min", "y_min", "x_max", "y_max"):
        if not hasattr(box, attr):
            raise TypeError(f"expected a BoundingBox-like object, got {type(box).__name__}")


def check_binary_labels(y) -> np.ndarray:
    """Validate and return labels as an int array of zeros and ones."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"labels must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty label array")
    if not np.isin(arr, (0, 1)).all():
        bad = sorted(set(np.unique(arr).tolist()) - {0, 1})
        raise ValueError(f"labels must be binary (0/1), found {bad}")
    return arr.astype(np.int64)


def check_crop_batch(X, side: int) -> np.ndarray:
    """Validate classifier input: (N, side, side, 3) uint8 array."""
    arr = np.asarray(X)
    if arr.ndim != 4 or arr.shape[1:] != (side, side, 3):
        raise ValueError(
            f"expected crops of shape (N, {side}, {side}, 3), got {arr.shape}"
        )
    if arr.shape[0] == 0:
        raise ValueError("empty crop batch")
    if arr.dtype != np.uint8:
        raise ValueError(f"crops must be uint8, got {arr.dtype}")
    return arr
