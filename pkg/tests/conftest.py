"""Shared fixtures: tiny synthetic corpora and sample builders.

Heavy end-to-end runs live in test_acceptance.py with session-scoped
fixtures; everything here is sized for seconds, not minutes.
"""
from __future__ import annotations

import numpy as np
import pytest

from equicascade.data.frames import FrameSample
from equicascade.synth import SynthSpec, generate_frame

pytest_plugins: list[str] = []


@pytest.fixture(scope="session")
def synth_spec():
    return SynthSpec()


@pytest.fixture(scope="session")
def face_frames(synth_spec):
    """16 neutral frames with ground-truth boxes, one per subject cycle."""
    frames = []
    for i in range(16):
        img, boxes = generate_frame(
            synth_spec, seed=123, clip_id=f"probe_{i:04d}",
            subject=f"s{i % 8}", label="AD160",
        )
        frames.append((img, boxes))
    return frames


def make_sample(clip_id: str, subject: str, label: str, side: int = 8,
                frame_index: int = 0, fill: int = 0) -> FrameSample:
    image = np.full((side, side, 3), fill, dtype=np.uint8)
    return FrameSample(clip_id=clip_id, frame_index=frame_index,
                       image=image, label=label, subject_id=subject)


@pytest.fixture
def sample_builder():
    return make_sample
