"""Frame sampling: one frame per labeled clip, plus the on-disk frame cache.

Sampling is deterministic: each clip draws from its own generator derived
from ``(seed, clip_id)``, so results do not depend on manifest order or on
how the work is parallelized.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from ..seeding import derive_rng
from .manifest import ClipLabel
from .video import ClipReader, FrameReadError

logger = logging.getLogger(__name__)

CACHE_INDEX_NAME = "index.jsonl"


@dataclass(frozen=True)
class FrameSample:
    """One image sampled from a clip, with provenance."""

    clip_id: str
    frame_index: int
    image: np.ndarray  # (H, W, 3) uint8 RGB
    label: str
    subject_id: str


@dataclass(frozen=True)
class SkipRecord:
    clip_id: str
    reason: str


def sample_frames(
    manifest: Sequence[ClipLabel],
    reader: ClipReader,
    seed: int,
) -> tuple[list[FrameSample], list[SkipRecord]]:
    """Sample one frame, uniformly over its frame range, from each clip.

    Unreadable clips are skipped and reported; the pipeline continues.
    """
    samples: list[FrameSample] = []
    skips: list[SkipRecord] = []
    for clip in manifest:
        try:
            frames = reader.frame_range(clip)
            if len(frames) == 0:
                raise FrameReadError(f"clip {clip.clip_id}: empty frame range")
            rng = derive_rng(seed, "frames", clip.clip_id)
            index = int(frames[rng.integers(len(frames))])
            image = reader.read_frame(clip, index)
        except FrameReadError as exc:
            logger.warning("skipping clip %s: %s", clip.clip_id, exc)
            skips.append(SkipRecord(clip_id=clip.clip_id, reason=str(exc)))
            continue
        samples.append(FrameSample(
            clip_id=clip.clip_id,
            frame_index=index,
            image=np.ascontiguousarray(image),
            label=clip.au,
            subject_id=clip.subject_id,
        ))
    return samples, skips


def write_skip_report(skips: Iterable[SkipRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for skip in skips:
            fh.write(json.dumps({"clip_id": skip.clip_id, "reason": skip.reason}) + "\n")


def save_frame_cache(samples: Iterable[FrameSample], out_dir: str | Path) -> Path:
    """Write samples as PNGs named ``<clip_id>_<frame_index>.png`` plus an
    index JSONL carrying the labels."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index_path = out_dir / CACHE_INDEX_NAME
    with index_path.open("w", encoding="utf-8") as fh:
        for s in samples:
            name = f"{s.clip_id}_{s.frame_index}.png"
            Image.fromarray(s.image).save(out_dir / name)
            fh.write(json.dumps({
                "clip_id": s.clip_id,
                "frame_index": s.frame_index,
                "label": s.label,
                "subject_id": s.subject_id,
                "file": name,
            }) + "\n")
    return index_path


def load_frame_cache(cache_dir: str | Path) -> list[FrameSample]:
    cache_dir = Path(cache_dir)
    index_path = cache_dir / CACHE_INDEX_NAME
    samples = []
    with index_path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            with Image.open(cache_dir / row["file"]) as img:
                image = np.asarray(img.convert("RGB"))
            samples.append(FrameSample(
                clip_id=row["clip_id"],
                frame_index=int(row["frame_index"]),
                image=image,
                label=row["label"],
                subject_id=row["subject_id"],
            ))
    return samples
