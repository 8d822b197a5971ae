"""Balanced binary datasets: all positives plus an equal number of
randomly drawn negatives.

A frame is negative for AU X iff its source clip is not labeled X; the
corpus labels clips, not frames, so no frame-level cross-checking is
attempted.  Balancing is performed once per split and is deterministic
given the seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..seeding import derive_rng
from .frames import FrameSample

SPLITS = ("train", "val", "test")


class BalanceError(ValueError):
    """Raised when a balanced set cannot be constructed."""


class SubjectLeakageError(AssertionError):
    """Raised when a sample's subject falls outside its split's subjects."""


@dataclass(frozen=True)
class BalancedSet:
    positives: tuple[FrameSample, ...]
    negatives: tuple[FrameSample, ...]
    target_au: str
    split: str

    def __len__(self) -> int:
        return len(self.positives) + len(self.negatives)

    @property
    def samples(self) -> tuple[FrameSample, ...]:
        return self.positives + self.negatives

    @property
    def labels(self) -> tuple[bool, ...]:
        return (True,) * len(self.positives) + (False,) * len(self.negatives)


def build_binary_dataset(
    samples: Sequence[FrameSample],
    target_au: str,
    split_subjects: Iterable[str],
    seed: int,
    split: str = "train",
) -> BalancedSet:
    """All positives for ``target_au`` among ``split_subjects``, plus an
    equal-size uniform draw (without replacement) of eligible negatives."""
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    subjects = frozenset(split_subjects)
    in_split = [s for s in samples if s.subject_id in subjects]
    positives = [s for s in in_split if s.label == target_au]
    eligible = [s for s in in_split if s.label != target_au]
    if not positives:
        raise BalanceError(f"no positives for {target_au} in split {split!r}")
    if len(eligible) < len(positives):
        raise BalanceError(
            f"insufficient negatives for {target_au} in split {split!r}: "
            f"need {len(positives)}, have {len(eligible)} "
            f"(short by {len(positives) - len(eligible)})"
        )
    rng = derive_rng(seed, "balance", target_au, split)
    picks = rng.choice(len(eligible), size=len(positives), replace=False)
    negatives = [eligible[i] for i in sorted(picks)]
    return BalancedSet(
        positives=tuple(positives),
        negatives=tuple(negatives),
        target_au=target_au,
        split=split,
    )


def check_balanced(dataset: BalancedSet) -> None:
    """Assert exact balance and negative purity."""
    if len(dataset.positives) != len(dataset.negatives):
        raise BalanceError(
            f"unbalanced set for {dataset.target_au}/{dataset.split}: "
            f"{len(dataset.positives)} positives vs {len(dataset.negatives)} negatives"
        )
    for s in dataset.negatives:
        if s.label == dataset.target_au:
            raise BalanceError(
                f"negative sample {s.clip_id} carries the target label {dataset.target_au}"
            )


def check_subjects(dataset: BalancedSet, allowed_subjects: Iterable[str]) -> None:
    """Assert every sample's subject belongs to the split's subject set."""
    allowed = frozenset(allowed_subjects)
    for s in dataset.samples:
        if s.subject_id not in allowed:
            raise SubjectLeakageError(
                f"sample {s.clip_id} (subject {s.subject_id}) leaked into "
                f"split {dataset.split!r} restricted to {sorted(allowed)}"
            )
