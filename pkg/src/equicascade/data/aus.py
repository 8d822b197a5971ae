"""Action-unit code registry and class selection.

The corpus labels clips with EquiFACS action unit (AU) and action
descriptor (AD) codes.  Nine codes are supported for still-image
classification; the ear descriptors are motion-defined and excluded by
default.  Each supported code maps to the facial region whose crop is fed
to its classifier.
"""
from __future__ import annotations

from collections import Counter
from typing import Iterable, Mapping

# Region identifiers used across detectors, cascade and classifiers.
FACE = "face"
EYE = "eye"
LOWER_FACE = "lower_face"
REGION_KINDS = (FACE, EYE, LOWER_FACE)

# Codes classified from the eye crop vs. the lower-face crop.
EYE_REGION_CODES = frozenset({"AD1", "AU101", "AU145", "AU47", "AU5"})
LOWER_FACE_CODES = frozenset({"AD19", "AD38", "AU25", "AUH13"})
IN_SCOPE_CODES = frozenset(EYE_REGION_CODES | LOWER_FACE_CODES)

# Ear action descriptors: defined by movement, not detectable in stills.
EAR_CODES = frozenset({"EAD101", "EAD104"})

# Codes that appear in corpus manifests but are never classified
# (too scarce, or indistinguishable from an in-scope code in stills).
AUXILIARY_CODES = frozenset({"AD160", "AU143"})

KNOWN_CODES = frozenset(IN_SCOPE_CODES | EAR_CODES | AUXILIARY_CODES)

# Label used by the synthetic corpus for clips that render no action unit.
NEUTRAL_CODE = "AD160"

# Presentation order for reports: eye-region codes first, then lower face.
REPORT_CODE_ORDER = (
    "AU101", "AD1", "AU145", "AU47", "AU5",
    "AU25", "AD19", "AD38", "AUH13",
)


def region_for(au: str) -> str:
    """Facial region whose crop carries the code's visual evidence."""
    if au in EYE_REGION_CODES:
        return EYE
    if au in LOWER_FACE_CODES:
        return LOWER_FACE
    raise ValueError(f"no region mapping for AU code {au!r}")


def class_counts(manifest: Iterable) -> Counter:
    """Number of labeled clips per AU code. Absent codes count as 0."""
    return Counter(clip.au for clip in manifest)


def select_classes(
    counts: Mapping[str, int],
    min_count: int = 200,
    exclude: frozenset[str] = EAR_CODES,
) -> list[str]:
    """Codes with strictly more than ``min_count`` clips, minus ``exclude``.

    Returned sorted lexicographically.
    """
    if min_count <= 0:
        raise ValueError("min_count must be positive")
    return sorted(
        code
        for code, n in counts.items()
        if n > min_count and code not in exclude
    )
