"""Binary metrics and their per-fold / aggregate containers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

SKIPPED_NO_POSITIVES = "skipped: no positives"


def skipped_fold(fold_index: int, au: str, family: str, region_level: str, reason: str) -> "FoldResult":
    """A fold excluded from aggregation, with zeroed metrics."""
    return FoldResult(
        fold_index=fold_index,
        au=au,
        family=family,
        region_level=region_level,
        accuracy=0.0,
        f1=0.0,
        n_test=0,
        status=reason,
    )


def binary_metrics(predictions, labels) -> tuple[float, float]:
    """(accuracy, f1) from boolean/0-1 sequences of equal length.

    F1 is 0 by convention when precision + recall is undefined (no true
    positives and no positive predictions or labels).
    """
    if len(predictions) != len(labels):
        raise ValueError("predictions and labels must have equal length")
    if len(predictions) == 0:
        raise ValueError("empty input")
    tp = fp = fn = correct = 0
    for pred, label in zip(predictions, labels):
        p, t = bool(pred), bool(label)
        if p == t:
            correct += 1
        if p and t:
            tp += 1
        elif p and not t:
            fp += 1
        elif t and not p:
            fn += 1
    accuracy = correct / len(predictions)
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom else 0.0
    return accuracy, f1


@dataclass(frozen=True)
class FoldResult:
    fold_index: int
    au: str
    family: str
    region_level: str
    accuracy: float
    f1: float
    n_test: int
    status: str = "ok"  # or "skipped: <reason>"

    def __post_init__(self):
        if self.status == "ok":
            if not (0.0 <= self.accuracy <= 1.0 and 0.0 <= self.f1 <= 1.0):
                raise ValueError(f"metrics out of range: acc={self.accuracy}, f1={self.f1}")
            if self.n_test <= 0:
                raise ValueError("n_test must be positive for a completed fold")

    @property
    def valid(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class ReportRow:
    au: str
    family: str
    region_level: str
    acc_mean: float
    acc_std: float
    f1_mean: float
    f1_std: float
    n_folds: int
    skipped: tuple[str, ...] = ()


@dataclass
class EvalReport:
    """Aggregated rows plus the per-fold detail they came from."""

    rows: list[ReportRow] = field(default_factory=list)
    folds: list[FoldResult] = field(default_factory=list)
    std_convention: str = "sample standard deviation (ddof=1); single-fold rows report std 0"


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def aggregate(results: list[FoldResult]) -> ReportRow:
    """Collapse the fold results of one (au, family, region_level) cell.

    Invalid folds are excluded from the statistics and listed on the row.
    """
    if not results:
        raise ValueError("no fold results to aggregate")
    keys = {(r.au, r.family, r.region_level) for r in results}
    if len(keys) != 1:
        raise ValueError(f"fold results span multiple cells: {sorted(keys)}")
    au, family, region_level = keys.pop()
    if len({r.fold_index for r in results}) != len(results):
        raise ValueError("duplicate fold indices")
    valid = [r for r in results if r.valid]
    skipped = tuple(
        f"fold{r.fold_index}: {r.status}" for r in sorted(results, key=lambda r: r.fold_index) if not r.valid
    )
    if not valid:
        # zeros rather than NaN so reports stay equality-comparable
        return ReportRow(au, family, region_level, 0.0, 0.0, 0.0, 0.0, 0, skipped)
    acc_mean, acc_std = _mean_std([r.accuracy for r in valid])
    f1_mean, f1_std = _mean_std([r.f1 for r in valid])
    return ReportRow(au, family, region_level, acc_mean, acc_std, f1_mean, f1_std, len(valid), skipped)
