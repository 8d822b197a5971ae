"""Render aggregated cross-validation results as Markdown and CSV.

The Markdown table uses percent "mean±std" cells; the CSV pair keeps
full float precision so a re-parse reproduces the report exactly.
"""
from __future__ import annotations

from pathlib import Path

from ..data.aus import REPORT_CODE_ORDER
from ..models.networks import FAMILIES, REGION_LEVELS
from .metrics import EvalReport, FoldResult, ReportRow, aggregate

REPORT_MD = "report.md"
REPORT_CSV = "report.csv"
FOLDS_CSV = "folds.csv"

_ROW_FIELDS = ("au", "family", "region_level", "acc_mean", "acc_std", "f1_mean", "f1_std", "n_folds", "skipped")
_FOLD_FIELDS = ("fold_index", "au", "family", "region_level", "accuracy", "f1", "n_test", "status")


def _au_rank(au: str) -> tuple[int, str]:
    try:
        return (REPORT_CODE_ORDER.index(au), au)
    except ValueError:
        return (len(REPORT_CODE_ORDER), au)


def _family_rank(family: str) -> tuple[int, str]:
    try:
        return (FAMILIES.index(family), family)
    except ValueError:
        return (len(FAMILIES), family)


def _level_rank(level: str) -> tuple[int, str]:
    try:
        return (REGION_LEVELS.index(level), level)
    except ValueError:
        return (len(REGION_LEVELS), level)


def sort_key(row) -> tuple:
    return (_au_rank(row.au), _family_rank(row.family), _level_rank(row.region_level))


def build_report(folds: list[FoldResult]) -> EvalReport:
    """Group fold results into cells, aggregate each, and sort rows."""
    if not folds:
        raise ValueError("no fold results")
    cells: dict[tuple, list[FoldResult]] = {}
    for fold in folds:
        cells.setdefault((fold.au, fold.family, fold.region_level), []).append(fold)
    rows = [aggregate(group) for group in cells.values()]
    rows.sort(key=sort_key)
    detail = sorted(folds, key=lambda f: (sort_key(f), f.fold_index))
    return EvalReport(rows=rows, folds=detail)


def _pct(mean: float, std: float, n_folds: int) -> str:
    if n_folds == 0:
        return "n/a"
    return f"{100 * mean:.1f}±{100 * std:.1f}"


def render_markdown(report: EvalReport) -> str:
    lines = [
        "# Cross-validation report",
        "",
        f"Values are percent mean±std over completed folds ({report.std_convention}).",
        "",
        "| AU | Family | Region level | Accuracy | F1 | Folds |",
        "|---|---|---|---|---|---|",
    ]
    for row in report.rows:
        lines.append(
            f"| {row.au} | {row.family} | {row.region_level} "
            f"| {_pct(row.acc_mean, row.acc_std, row.n_folds)} "
            f"| {_pct(row.f1_mean, row.f1_std, row.n_folds)} "
            f"| {row.n_folds} |"
        )
    skipped = [s for row in report.rows for s in row.skipped]
    if skipped:
        lines += ["", "Skipped folds:", ""]
        lines += [f"- {note}" for note in skipped]
    lines.append("")
    return "\n".join(lines)


def render_report(report: EvalReport, out_dir) -> list[Path]:
    """Write report.md, report.csv and folds.csv; returns the paths."""
    if not report.rows:
        raise ValueError("empty report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    md = out / REPORT_MD
    md.write_text(render_markdown(report), encoding="utf-8")

    rows_csv = out / REPORT_CSV
    lines = [",".join(_ROW_FIELDS)]
    for row in report.rows:
        lines.append(
            f"{row.au},{row.family},{row.region_level},"
            f"{row.acc_mean!r},{row.acc_std!r},{row.f1_mean!r},{row.f1_std!r},"
            f"{row.n_folds},{';'.join(row.skipped)}"
        )
    rows_csv.write_text("\n".join(lines) + "\n", encoding="utf-8")

    folds_csv = out / FOLDS_CSV
    lines = [",".join(_FOLD_FIELDS)]
    for fold in report.folds:
        lines.append(
            f"{fold.fold_index},{fold.au},{fold.family},{fold.region_level},"
            f"{fold.accuracy!r},{fold.f1!r},{fold.n_test},{fold.status}"
        )
    folds_csv.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return [md, rows_csv, folds_csv]


def load_report(out_dir) -> EvalReport:
    """Re-parse the CSV pair written by :func:`render_report`."""
    out = Path(out_dir)
    rows = []
    for line in (out / REPORT_CSV).read_text(encoding="utf-8").splitlines()[1:]:
        au, family, level, am, as_, fm, fs, n, skipped = line.split(",")
        rows.append(
            ReportRow(
                au=au,
                family=family,
                region_level=level,
                acc_mean=float(am),
                acc_std=float(as_),
                f1_mean=float(fm),
                f1_std=float(fs),
                n_folds=int(n),
                skipped=tuple(skipped.split(";")) if skipped else (),
            )
        )
    folds = []
    for line in (out / FOLDS_CSV).read_text(encoding="utf-8").splitlines()[1:]:
        idx, au, family, level, acc, f1, n_test, status = line.split(",", 7)
        folds.append(
            FoldResult(
                fold_index=int(idx),
                au=au,
                family=family,
                region_level=level,
                accuracy=float(acc),
                f1=float(f1),
                n_test=int(n_test),
                status=status,
            )
        )
    return EvalReport(rows=rows, folds=folds)
