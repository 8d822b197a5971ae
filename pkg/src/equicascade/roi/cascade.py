"""Hierarchical region extraction: frame -> face -> facial region.

The face detector runs on the full frame and its highest-confidence hit
is cropped to a square face image.  A region detector (eye or lower
face) then runs on that face crop, and its best hit is cropped again to
the classifier input size.  Every crop records the transform chain so
region boxes can be reported in original frame coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..validation import check_image
from .boxes import BoundingBox, CropTransform, Detection, crop_and_normalize
from .detector import RoiDetector

FACE_SIDE = 512
REGION_SIDE = 64


class CascadeMiss(RuntimeError):
    """A detector stage produced no detection above threshold."""

    def __init__(self, stage: str, message: str | None = None):
        self.stage = stage
        super().__init__(message or f"no {stage} detection above threshold")


@dataclass(frozen=True)
class RegionCrop:
    """Output of the cascade for one frame.

    ``image`` is the square region crop ready for a classifier.
    ``box_in_frame`` locates the detected region in original frame
    coordinates; ``face_box_in_frame`` does the same for the face stage
    (equal to ``box_in_frame`` when the cascade stops at the face).
    """

    image: np.ndarray
    box_in_frame: BoundingBox
    face_box_in_frame: BoundingBox
    face_confidence: float
    region_confidence: float | None


def _best(detections: list[Detection], stage: str) -> Detection:
    if not detections:
        raise CascadeMiss(stage)
    return detections[0]  # predict() output is confidence-sorted


class CascadeDetector:
    """Pairs a face detector with optional region detectors."""

    def __init__(
        self,
        face: RoiDetector,
        eye: RoiDetector | None = None,
        lower_face: RoiDetector | None = None,
        face_side: int = FACE_SIDE,
        region_side: int = REGION_SIDE,
    ):
        self.face = face
        self.regions = {}
        if eye is not None:
            self.regions["eye"] = eye
        if lower_face is not None:
            self.regions["lower_face"] = lower_face
        self.face_side = face_side
        self.region_side = region_side

    def extract_face(self, frame: np.ndarray) -> tuple[RegionCrop, CropTransform]:
        check_image(frame)
        det = _best(self.face.detect(frame), "face")
        crop, transform = crop_and_normalize(frame, det.box, self.face_side)
        region = RegionCrop(
            image=crop,
            box_in_frame=det.box,
            face_box_in_frame=det.box,
            face_confidence=det.confidence,
            region_confidence=None,
        )
        return region, transform

    def extract(self, frame: np.ndarray, region_kind: str) -> RegionCrop:
        """Run the full cascade; ``region_kind`` of "face" stops after
        the first stage and returns the ``face_side`` crop."""
        face_crop, face_transform = self.extract_face(frame)
        if region_kind == "face":
            return face_crop
        if region_kind not in self.regions:
            raise KeyError(f"no detector configured for region {region_kind!r}")
        det = _best(self.regions[region_kind].detect(face_crop.image), region_kind)
        crop, _ = crop_and_normalize(face_crop.image, det.box, self.region_side)
        box_in_frame = face_transform.box_to_source(det.box).clip(
            frame.shape[1], frame.shape[0]
        )
        return RegionCrop(
            image=crop,
            box_in_frame=box_in_frame,
            face_box_in_frame=face_crop.face_box_in_frame,
            face_confidence=face_crop.face_confidence,
            region_confidence=det.confidence,
        )


def cascade_detect(
    frame: np.ndarray,
    face: RoiDetector,
    region: RoiDetector | None = None,
) -> RegionCrop:
    """One-shot convenience wrapper around :class:`CascadeDetector`."""
    kwargs = {}
    kind = "face"
    if region is not None:
        kwargs[region.kind] = region
        kind = region.kind
    return CascadeDetector(face, **kwargs).extract(frame, kind)
