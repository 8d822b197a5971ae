"""Subject-exclusive eight-fold splits.

Fold i tests on subjects[i], validates on subjects[(i+1) % 8] and trains
on the remaining six, so every subject is the test subject exactly once
and no subject ever appears in two roles within a fold.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

N_SUBJECTS = 8


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_subjects: frozenset[str]
    val_subject: str
    test_subject: str

    def subjects_for(self, split: str) -> frozenset[str]:
        if split == "train":
            return self.train_subjects
        if split == "val":
            return frozenset({self.val_subject})
        if split == "test":
            return frozenset({self.test_subject})
        raise ValueError(f"unknown split {split!r}")

    def role_of(self, subject_id: str) -> str | None:
        if subject_id == self.test_subject:
            return "test"
        if subject_id == self.val_subject:
            return "val"
        if subject_id in self.train_subjects:
            return "train"
        return None


def make_subject_folds(subjects: Sequence[str]) -> list[FoldSplit]:
    """Build the 8 rotation folds over an ordered list of 8 subjects."""
    subjects = list(subjects)
    if len(subjects) != N_SUBJECTS:
        raise ValueError(f"expected exactly {N_SUBJECTS} subjects, got {len(subjects)}")
    if len(set(subjects)) != N_SUBJECTS:
        raise ValueError("subjects must be distinct")
    folds = []
    for i in range(N_SUBJECTS):
        test = subjects[i]
        val = subjects[(i + 1) % N_SUBJECTS]
        train = frozenset(s for s in subjects if s not in (test, val))
        folds.append(FoldSplit(
            fold_index=i,
            train_subjects=train,
            val_subject=val,
            test_subject=test,
        ))
    return folds
