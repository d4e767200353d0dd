"""Dataset CSV I/O: header ``f0..f139,label``, one row per sample."""

import csv
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from app.evguard.schemas.errors import DatasetFormatError, ErrorCode
from app.evguard.schemas.features import LABELS, Dataset, FeatureLayout
from app.evguard.services.features.layout import load_layout

logger = logging.getLogger(__name__)

LABEL_COLUMN = "label"
FLOAT_FORMAT = "%.17g"


def write_csv(dataset: Dataset, path: str | Path) -> Path:
    """Write a dataset with round-trippable floats.

    Args:
        dataset: Dataset to write
        path: Destination CSV

    Returns:
        The written path

    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(dataset.features, columns=dataset.layout.column_names)
    frame[LABEL_COLUMN] = dataset.labels
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    msg = f"Wrote {len(dataset)} rows to {path}"
    logger.info(msg)
    return path


def _check_structure(path: Path, expected: list[str]) -> None:
    """Header and per-row arity, reported with their location."""
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            msg = f"{path} is empty"
            raise DatasetFormatError(msg)
        if header != expected:
            feature_columns = len(header) - (1 if header[-1:] == [LABEL_COLUMN] else 0)
            msg = (
                f"{path} header does not match the layout: expected "
                f"{len(expected) - 1} feature columns + label, got {feature_columns}"
                f"{'' if header[-1:] == [LABEL_COLUMN] else ' and no label column'}"
            )
            mismatch = next(
                (name for name, want in zip(header, expected, strict=False) if name != want),
                None,
            )
            raise DatasetFormatError(
                msg, error_code=ErrorCode.LAYOUT_MISMATCH, column=mismatch
            )
        for row, cells in enumerate(reader, start=1):
            if len(cells) != len(expected):
                msg = f"expected {len(expected)} columns, got {len(cells)}"
                raise DatasetFormatError(msg, error_code=ErrorCode.SHAPE_MISMATCH, row=row)


def read_csv(path: str | Path, layout: FeatureLayout | None = None) -> Dataset:
    """Read a dataset CSV against a layout.

    Args:
        path: CSV file
        layout: Expected layout (defaults to the packaged manifest)

    Returns:
        Dataset equal to the one written

    Raises:
        DatasetFormatError: On header/layout mismatch, wrong column count, a
            non-numeric cell or a label outside {0, 1}; the error names the
            row (1-based, header excluded) and column

    """
    path = Path(path)
    if layout is None:
        layout = load_layout()
    expected = [*layout.column_names, LABEL_COLUMN]
    try:
        _check_structure(path, expected)
    except OSError as e:
        msg = f"Cannot read dataset {path}: {e}"
        raise DatasetFormatError(msg) from e

    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    invalid = (numeric.isna() | np.isinf(numeric)).to_numpy()
    if invalid.any():
        row, col = np.argwhere(invalid)[0]
        column = frame.columns[col]
        msg = f"non-numeric cell {frame.iloc[row, col]!r}"
        raise DatasetFormatError(
            msg, error_code=ErrorCode.INVALID_CELL, row=int(row) + 1, column=column
        )

    # Python float parsing keeps written values bit-exact.
    values = frame.to_numpy(dtype=object).astype(np.float64)
    features, labels = np.ascontiguousarray(values[:, :-1]), values[:, -1]
    in_domain = np.isin(labels, LABELS)
    if not in_domain.all():
        row = int(np.flatnonzero(~in_domain)[0])
        msg = f"label must be 0 (ransomware) or 1 (normal), got {frame[LABEL_COLUMN].iloc[row]}"
        raise DatasetFormatError(
            msg, error_code=ErrorCode.LABEL_DOMAIN, row=row + 1, column=LABEL_COLUMN
        )

    dataset = Dataset(features=features, labels=labels.astype(np.int64), layout=layout)
    msg = f"Read {len(dataset)} rows from {path}: {dataset.class_counts}"
    logger.info(msg)
    return dataset
