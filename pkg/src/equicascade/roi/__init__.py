from .boxes import BoundingBox, BoxAnnotation, Detection, crop_and_normalize, iou, nms
from .cascade import CascadeDetector, CascadeMiss, RegionCrop, cascade_detect
from .detector import RoiDetector

__all__ = [
    "BoundingBox",
    "BoxAnnotation",
    "CascadeDetector",
    "CascadeMiss",
    "Detection",
    "RegionCrop",
    "RoiDetector",
    "cascade_detect",
    "crop_and_normalize",
    "iou",
    "nms",
]
