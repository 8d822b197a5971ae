"""Named seed derivation.

All randomness in the pipeline flows from a single top-level integer seed.
Every stochastic stage derives its own stream from ``(seed, *labels)`` so
that runs are reproducible and independent stages (folds, clips, action
units) can be processed in any order, or in parallel, without interacting.
"""
from __future__ import annotations

import hashlib

import numpy as np

# torch.manual_seed rejects values outside the signed 64-bit range
_SEED_MASK = (1 << 63) - 1


def derive_seed(seed: int, *labels: object) -> int:
    """Return a stable 63-bit seed derived from ``seed`` and a label path."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode("utf-8"))
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little") & _SEED_MASK


def derive_rng(seed: int, *labels: object) -> np.random.Generator:
    """NumPy generator seeded from a derived seed."""
    return np.random.default_rng(derive_seed(seed, *labels))
