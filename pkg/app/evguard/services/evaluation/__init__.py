"""Cross-validation harness, detection metrics and report rendering."""

from app.evguard.services.evaluation.cross_validation import (
    cross_validate,
    run_single_experiment,
)
from app.evguard.services.evaluation.metrics import (
    confusion_at,
    metrics,
    roc_auc,
    summarize,
)
from app.evguard.services.evaluation.reports import (
    render_tables,
    write_cv_outputs,
    write_split_outputs,
)
from app.evguard.services.evaluation.splits import split_40_30_30, stratified_folds

__all__ = [
    "confusion_at",
    "cross_validate",
    "metrics",
    "render_tables",
    "roc_auc",
    "run_single_experiment",
    "split_40_30_30",
    "stratified_folds",
    "summarize",
    "write_cv_outputs",
    "write_split_outputs",
]
