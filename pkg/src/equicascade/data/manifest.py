"""Labeled-clip manifest ingestion.

The manifest is JSONL, one clip per line:

    {"clip_id": ..., "subject_id": ..., "au": ..., "t_start": ...,
     "t_end": ..., "video_uri": ...}

A CSV import shim accepts the same columns.  Clips are the unit of
labeling: one AU code per clip, with frame sampling done downstream.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .aus import KNOWN_CODES

logger = logging.getLogger(__name__)

MANIFEST_FIELDS = ("clip_id", "subject_id", "au", "t_start", "t_end", "video_uri")

# Observed clip duration range in the source corpus, seconds. Values
# outside produce a warning only.
DURATION_RANGE = (0.05, 120.0)


class ManifestError(ValueError):
    """Raised for malformed manifest rows."""


@dataclass(frozen=True)
class ClipLabel:
    """One labeled video clip."""

    clip_id: str
    subject_id: str
    au: str
    t_start: float
    t_end: float
    video_uri: str

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def _parse_row(row: dict, row_index: int, known_codes: frozenset[str]) -> ClipLabel:
    for field in MANIFEST_FIELDS:
        if field not in row or row[field] in (None, ""):
            raise ManifestError(f"row {row_index}: missing field {field!r}")
    au = str(row["au"])
    if au not in known_codes:
        raise ManifestError(f"row {row_index}: unknown AU code {au!r}")
    try:
        t_start = float(row["t_start"])
        t_end = float(row["t_end"])
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"row {row_index}: non-numeric clip times") from exc
    if not t_end > t_start:
        raise ManifestError(
            f"row {row_index}: t_end ({t_end}) must exceed t_start ({t_start})"
        )
    clip = ClipLabel(
        clip_id=str(row["clip_id"]),
        subject_id=str(row["subject_id"]),
        au=au,
        t_start=t_start,
        t_end=t_end,
        video_uri=str(row["video_uri"]),
    )
    lo, hi = DURATION_RANGE
    if not lo <= clip.duration <= hi:
        logger.warning(
            "clip %s: duration %.3f s outside the expected range [%.2f, %.1f]",
            clip.clip_id, clip.duration, lo, hi,
        )
    return clip


def load_manifest(path: str | Path, known_codes: Iterable[str] | None = None) -> list[ClipLabel]:
    """Parse a JSONL (or ``.csv``) manifest into ClipLabels, order preserved.

    Raises ManifestError on a missing field, an unknown AU code or a
    duplicate clip_id.
    """
    path = Path(path)
    codes = KNOWN_CODES if known_codes is None else frozenset(known_codes)
    if path.suffix.lower() == ".csv":
        rows = _read_csv(path)
    else:
        rows = _read_jsonl(path)
    clips: list[ClipLabel] = []
    seen: set[str] = set()
    for row_index, row in rows:
        clip = _parse_row(row, row_index, codes)
        if clip.clip_id in seen:
            raise ManifestError(f"row {row_index}: duplicate clip_id {clip.clip_id!r}")
        seen.add(clip.clip_id)
        clips.append(clip)
    return clips


def _read_jsonl(path: Path):
    with path.open("r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"row {i}: invalid JSON: {exc}") from exc
            yield i, row


def _read_csv(path: Path):
    with path.open("r", encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh)):
            yield i, row


def save_manifest(clips: Iterable[ClipLabel], path: str | Path) -> None:
    """Write clips as JSONL in the canonical field order."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for clip in clips:
            fh.write(json.dumps({
                "clip_id": clip.clip_id,
                "subject_id": clip.subject_id,
                "au": clip.au,
                "t_start": clip.t_start,
                "t_end": clip.t_end,
                "video_uri": clip.video_uri,
            }, sort_keys=False) + "\n")
