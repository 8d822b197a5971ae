"""Clip readers: map a ClipLabel to its decodable frame range.

Decoding internals stay behind this interface; the sampler only needs a
frame range per clip and random access to single frames.
"""
from __future__ import annotations

from pathlib import Path
from typing import Protocol

import numpy as np
from PIL import Image

from .manifest import ClipLabel


class FrameReadError(RuntimeError):
    """Raised when a clip's source cannot be decoded."""


class ClipReader(Protocol):
    def frame_range(self, clip: ClipLabel) -> range:
        """Decodable frame indices within [t_start, t_end]."""
        ...

    def read_frame(self, clip: ClipLabel, index: int) -> np.ndarray:
        """Decode one frame as an (H, W, 3) uint8 RGB array."""
        ...


class ImageClipReader:
    """Reader for corpora that store one still image per clip.

    ``video_uri`` points at a PNG/JPEG file, resolved against ``root``
    when relative.  Every clip spans exactly one frame.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None

    def _resolve(self, clip: ClipLabel) -> Path:
        p = Path(clip.video_uri)
        if not p.is_absolute() and self.root is not None:
            p = self.root / p
        return p

    def frame_range(self, clip: ClipLabel) -> range:
        return range(1)

    def read_frame(self, clip: ClipLabel, index: int) -> np.ndarray:
        if index != 0:
            raise FrameReadError(f"clip {clip.clip_id}: frame {index} out of range")
        path = self._resolve(clip)
        try:
            with Image.open(path) as img:
                return np.asarray(img.convert("RGB"))
        except OSError as exc:
            raise FrameReadError(f"clip {clip.clip_id}: cannot read {path}: {exc}") from exc


class VideoFileReader:
    """cv2-backed reader for real video files.

    Frame indices are derived from the container frame rate; the range
    covers [t_start, t_end] and always includes at least the frame at
    t_start.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None

    def _open(self, clip: ClipLabel):
        import cv2

        p = Path(clip.video_uri)
        if not p.is_absolute() and self.root is not None:
            p = self.root / p
        cap = cv2.VideoCapture(str(p))
        if not cap.isOpened():
            cap.release()
            raise FrameReadError(f"clip {clip.clip_id}: cannot open {p}")
        return cap

    def frame_range(self, clip: ClipLabel) -> range:
        import cv2

        cap = self._open(clip)
        try:
            fps = cap.get(cv2.CAP_PROP_FPS) or 0.0
            total = int(cap.get(cv2.CAP_PROP_FRAME_COUNT) or 0)
        finally:
            cap.release()
        if fps <= 0 or total <= 0:
            raise FrameReadError(f"clip {clip.clip_id}: no frame rate metadata")
        first = int(np.ceil(clip.t_start * fps))
        last = int(np.floor(clip.t_end * fps))
        first = min(max(first, 0), total - 1)
        last = min(max(last, first), total - 1)
        return range(first, last + 1)

    def read_frame(self, clip: ClipLabel, index: int) -> np.ndarray:
        import cv2

        cap = self._open(clip)
        try:
            cap.set(cv2.CAP_PROP_POS_FRAMES, index)
            ok, frame = cap.read()
        finally:
            cap.release()
        if not ok or frame is None:
            raise FrameReadError(f"clip {clip.clip_id}: cannot decode frame {index}")
        return cv2.cvtColor(frame, cv2.COLOR_BGR2RGB)
