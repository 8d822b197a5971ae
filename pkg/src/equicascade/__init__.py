"""Cascaded facial-region detection and per-AU binary classification.

The pipeline narrows still frames to a face crop, then to an eye or
lower-face crop, and feeds the crop to balanced per-AU binary
classifiers evaluated under subject-exclusive eight-fold
cross-validation.
"""
from .checkpoint import load_checkpoint, save_checkpoint
from .models.classifier import AUClassifier
from .roi.cascade import CascadeDetector, CascadeMiss, RegionCrop, cascade_detect
from .roi.detector import RoiDetector
from .saliency import SaliencyMap, grad_cam, overlay
from .seeding import derive_rng, derive_seed
from .synth import SynthSpec, generate_corpus

__version__ = "0.1.0"

__all__ = [
    "AUClassifier",
    "CascadeDetector",
    "CascadeMiss",
    "RegionCrop",
    "RoiDetector",
    "SaliencyMap",
    "SynthSpec",
    "cascade_detect",
    "derive_rng",
    "derive_seed",
    "generate_corpus",
    "grad_cam",
    "load_checkpoint",
    "overlay",
    "save_checkpoint",
]
