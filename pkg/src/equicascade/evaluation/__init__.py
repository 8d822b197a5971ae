from .experiment import CascadeCropProvider, FoldJob, OracleCropProvider, run_fold
from .metrics import EvalReport, FoldResult, aggregate, binary_metrics
from .pipeline import run_experiment, train_detector
from .report import build_report, load_report, render_report

__all__ = [
    "CascadeCropProvider",
    "EvalReport",
    "FoldJob",
    "FoldResult",
    "OracleCropProvider",
    "aggregate",
    "binary_metrics",
    "build_report",
    "load_report",
    "render_report",
    "run_experiment",
    "run_fold",
    "train_detector",
]
