"""Report rendering: aligned text tables, JSON documents and per-fold CSV.

Table rendering depends only on the report values, so the text output is
byte-stable for a given report.
"""

import json
from pathlib import Path

import pandas as pd

from app.evguard.schemas.evaluation import CvReport, SplitReport
from app.evguard.services.neuralnet.trainer import write_history_csv

TABLE_FILE = "table.txt"
REPORT_FILE = "cv_report.json"
FOLDS_FILE = "folds.csv"
HISTORY_FILE = "history.csv"
TEST_REPORT_FILE = "test_report.json"

_PERCENT = "{:.2f}"
_SECONDS = "{:.3f}"


def _table(title: str, header: list[str], rows: list[list[str]]) -> str:
    widths = [
        max(len(header[i]), *(len(row[i]) for row in rows)) if rows else len(header[i])
        for i in range(len(header))
    ]

    def _line(cells: list[str]) -> str:
        first = cells[0].ljust(widths[0])
        rest = [cell.rjust(width) for cell, width in zip(cells[1:], widths[1:], strict=True)]
        return "  ".join([first, *rest]).rstrip()

    rule = "-" * len(_line(header))
    return "\n".join([title, rule, _line(header), rule, *(_line(r) for r in rows), rule])


def _mean_std(report: CvReport, metric: str) -> list[str]:
    summary = report.summary[metric]
    return [_PERCENT.format(100.0 * summary.mean), _PERCENT.format(100.0 * summary.std)]


def render_tables(reports: list[CvReport]) -> str:
    """Detection table (AUC/ACC), metric table (precision/recall/F1/FAR) and training times.

    Values are percentages of held-out-fold metrics; times are seconds per fold.
    """
    k = reports[0].k if reports else 0
    detection = _table(
        f"{k} FOLD STRATIFIED CROSS-VALIDATION (held-out folds, %)",
        ["Model", "AUC(Mean)", "AUC(std)", "ACC(Mean)", "ACC(std)"],
        [
            [r.model.upper(), *_mean_std(r, "auc"), *_mean_std(r, "acc")]
            for r in reports
        ],
    )
    quality = _table(
        "DETECTION METRICS (held-out folds, %)",
        [
            "Model",
            "Precision(Mean)",
            "Precision(std)",
            "Recall(Mean)",
            "Recall(std)",
            "F1(Mean)",
            "F1(std)",
            "FAR(Mean)",
            "FAR(std)",
        ],
        [
            [
                r.model.upper(),
                *_mean_std(r, "precision"),
                *_mean_std(r, "recall"),
                *_mean_std(r, "f1"),
                *_mean_std(r, "far"),
            ]
            for r in reports
        ],
    )
    timing = _table(
        "TRAINING TIME (seconds per fold)",
        ["Model", "Time(Mean)", "Time(std)"],
        [
            [
                r.model.upper(),
                _SECONDS.format(r.train_time.mean),
                _SECONDS.format(r.train_time.std),
            ]
            for r in reports
        ],
    )
    return "\n\n".join([detection, quality, timing]) + "\n"


def cv_document(reports: list[CvReport]) -> dict:
    """Machine-readable form of one or more CV reports."""
    return {"reports": [r.model_dump(mode="json") for r in reports]}


def folds_frame(reports: list[CvReport]) -> pd.DataFrame:
    """One row per (model, fold) with counts and metrics."""
    rows = []
    for report in reports:
        for fold in report.folds:
            rows.append(
                {
                    "model": report.model,
                    "fold": fold.fold_index,
                    "n_train": fold.n_train,
                    "n_test": fold.n_test,
                    **fold.confusion.model_dump(),
                    "acc": fold.acc,
                    "precision": fold.precision,
                    "recall": fold.recall,
                    "f1": fold.f1,
                    "far": fold.far,
                    "auc": fold.auc,
                    "train_time": fold.train_time,
                }
            )
    return pd.DataFrame(rows)


def write_cv_outputs(reports: list[CvReport], out_dir: str | Path) -> list[Path]:
    """Write table.txt, cv_report.json and folds.csv into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table_path = out_dir / TABLE_FILE
    table_path.write_text(render_tables(reports), encoding="utf-8")
    report_path = out_dir / REPORT_FILE
    report_path.write_text(json.dumps(cv_document(reports), indent=2) + "\n", encoding="utf-8")
    folds_path = out_dir / FOLDS_FILE
    folds_frame(reports).to_csv(
        folds_path, index=False, float_format="%.10g", lineterminator="\n"
    )
    return [table_path, report_path, folds_path]


def write_split_outputs(report: SplitReport, out_dir: str | Path) -> list[Path]:
    """Write history.csv (epoch vs. loss/accuracy) and test_report.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    history_path = write_history_csv(report.history, out_dir / HISTORY_FILE)
    report_path = out_dir / TEST_REPORT_FILE
    document = report.model_dump(mode="json", exclude={"history"})
    document["wall_time"] = report.history.wall_time
    report_path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    return [history_path, report_path]
