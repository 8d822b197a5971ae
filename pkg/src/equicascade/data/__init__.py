from .aus import IN_SCOPE_CODES, region_for, select_classes
from .balance import BalancedSet, build_binary_dataset, check_balanced, check_subjects
from .folds import FoldSplit, make_subject_folds
from .frames import FrameSample, load_frame_cache, sample_frames, save_frame_cache
from .manifest import ClipLabel, load_manifest, save_manifest

__all__ = [
    "BalancedSet",
    "ClipLabel",
    "FoldSplit",
    "FrameSample",
    "IN_SCOPE_CODES",
    "build_binary_dataset",
    "check_balanced",
    "check_subjects",
    "load_frame_cache",
    "load_manifest",
    "make_subject_folds",
    "region_for",
    "sample_frames",
    "save_frame_cache",
    "save_manifest",
    "select_classes",
]
