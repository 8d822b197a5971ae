"""Axis-aligned boxes, overlap math, suppression and crop normalization.

All boxes live in source-image pixel coordinates as (x_min, y_min, x_max,
y_max) with x_max > x_min and y_max > y_min.  Crop normalization follows
the corpus convention: cut the rectangle out, zero-pad it to a square
(extra pixel on the bottom/right when odd) and resize bilinearly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import cv2
import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError(f"degenerate box {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def clip(self, width: int, height: int) -> "BoundingBox":
        """Clip to image bounds, keeping at least one pixel of extent."""
        x0 = min(max(self.x_min, 0.0), width - 1.0)
        y0 = min(max(self.y_min, 0.0), height - 1.0)
        x1 = max(min(self.x_max, float(width)), x0 + 1.0)
        y1 = max(min(self.y_max, float(height)), y0 + 1.0)
        return BoundingBox(x0, y0, x1, y1)


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    confidence: float
    kind: str  # face | eye | lower_face

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union, in [0, 1]."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def nms(detections: Sequence[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy confidence-descending suppression.

    Keeps the highest-confidence detection, drops everything overlapping
    it above the threshold, and repeats.  Ties break on the smaller input
    index.  Output is sorted by descending confidence.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in (0, 1)")
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].confidence, i))
    kept: list[Detection] = []
    suppressed = [False] * len(detections)
    for i in order:
        if suppressed[i]:
            continue
        kept.append(detections[i])
        for j in order:
            if not suppressed[j] and iou(detections[i].box, detections[j].box) > iou_threshold:
                suppressed[j] = True
    return kept


class PadSpec(NamedTuple):
    top: int
    bottom: int
    left: int
    right: int


def pad_to_square(image: np.ndarray) -> tuple[np.ndarray, PadSpec]:
    """Zero-pad to max(H, W) on each side, content centered.

    When the total padding is odd, the extra pixel goes to the bottom or
    right.
    """
    h, w = image.shape[:2]
    if h < 1 or w < 1:
        raise ValueError("empty image")
    side = max(h, w)
    top = (side - h) // 2
    bottom = side - h - top
    left = (side - w) // 2
    right = side - w - left
    spec = PadSpec(top, bottom, left, right)
    if side == h == w:
        return image, spec
    pad_width = [(top, bottom), (left, right)] + [(0, 0)] * (image.ndim - 2)
    return np.pad(image, pad_width, mode="constant"), spec


def resize_square(image: np.ndarray, target_side: int) -> np.ndarray:
    """Bilinear resize of a square image to target_side x target_side."""
    h, w = image.shape[:2]
    if h != w:
        raise ValueError(f"resize_square expects a square input, got {h}x{w}")
    if h == target_side:
        return image.copy()
    return cv2.resize(image, (target_side, target_side), interpolation=cv2.INTER_LINEAR)


@dataclass(frozen=True)
class CropTransform:
    """Affine map between source-image and crop coordinates.

    Records the integer rectangle that was cut out, the zero-padding and
    the resize scale, so points and boxes can be projected in either
    direction.
    """

    source_box: BoundingBox  # integer rectangle actually cropped
    pad: PadSpec
    scale: float  # crop pixels per padded pixel

    def to_crop(self, x: float, y: float) -> tuple[float, float]:
        return (
            (x - self.source_box.x_min + self.pad.left) * self.scale,
            (y - self.source_box.y_min + self.pad.top) * self.scale,
        )

    def to_source(self, x: float, y: float) -> tuple[float, float]:
        return (
            x / self.scale - self.pad.left + self.source_box.x_min,
            y / self.scale - self.pad.top + self.source_box.y_min,
        )

    def box_to_crop(self, box: BoundingBox) -> BoundingBox:
        x0, y0 = self.to_crop(box.x_min, box.y_min)
        x1, y1 = self.to_crop(box.x_max, box.y_max)
        return BoundingBox(x0, y0, x1, y1)

    def box_to_source(self, box: BoundingBox) -> BoundingBox:
        x0, y0 = self.to_source(box.x_min, box.y_min)
        x1, y1 = self.to_source(box.x_max, box.y_max)
        return BoundingBox(x0, y0, x1, y1)


def crop_and_normalize(
    image: np.ndarray,
    box: BoundingBox | None,
    target_side: int,
) -> tuple[np.ndarray, CropTransform]:
    """Cut ``box`` out of ``image`` (whole image when None), zero-pad to a
    square and resize to ``target_side``.  Returns the crop and the
    transform mapping crop coordinates back to the source image."""
    h, w = image.shape[:2]
    if box is None:
        x0, y0, x1, y1 = 0, 0, w, h
    else:
        clipped = box.clip(w, h)
        x0 = int(np.floor(clipped.x_min))
        y0 = int(np.floor(clipped.y_min))
        x1 = max(int(np.ceil(clipped.x_max)), x0 + 1)
        y1 = max(int(np.ceil(clipped.y_max)), y0 + 1)
    region = image[y0:y1, x0:x1]
    padded, pad = pad_to_square(region)
    crop = resize_square(padded, target_side)
    transform = CropTransform(
        source_box=BoundingBox(float(x0), float(y0), float(x1), float(y1)),
        pad=pad,
        scale=target_side / padded.shape[0],
    )
    return crop, transform


@dataclass(frozen=True)
class BoxAnnotation:
    """Ground-truth box for one image, as stored in annotation JSONL."""

    image: str  # image file name or identifier
    kind: str
    box: BoundingBox


def save_box_annotations(annotations: Iterable[BoxAnnotation], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for a in annotations:
            fh.write(json.dumps({
                "image": a.image,
                "class": a.kind,
                "x_min": a.box.x_min,
                "y_min": a.box.y_min,
                "x_max": a.box.x_max,
                "y_max": a.box.y_max,
            }) + "\n")


def load_box_annotations(path: str | Path) -> list[BoxAnnotation]:
    annotations = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            annotations.append(BoxAnnotation(
                image=row["image"],
                kind=row["class"],
                box=BoundingBox(
                    float(row["x_min"]), float(row["y_min"]),
                    float(row["x_max"]), float(row["y_max"]),
                ),
            ))
    return annotations


def annotations_by_image(annotations: Iterable[BoxAnnotation]) -> dict[str, dict[str, BoundingBox]]:
    """Index annotations as image -> kind -> box (one box per kind)."""
    index: dict[str, dict[str, BoundingBox]] = {}
    for a in annotations:
        index.setdefault(a.image, {})[a.kind] = a.box
    return index
