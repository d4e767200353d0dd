"""Stratified fold and hold-out split construction."""

import numpy as np
from sklearn.model_selection import StratifiedKFold, train_test_split

from app.evguard.schemas.errors import DegenerateDataError
from app.evguard.schemas.features import LABELS

MIN_SPLIT_ROWS = 10
TRAIN_FRACTION = 0.4
VAL_FRACTION = 0.3


def _labels(labels: np.ndarray | list[int]) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or not np.isin(labels, LABELS).all():
        msg = "labels must be a flat sequence of 0/1 values"
        raise DegenerateDataError(msg)
    return labels.astype(np.int64)


def stratified_folds(
    labels: np.ndarray | list[int], k: int, seed: int
) -> list[np.ndarray]:
    """Partition row indices into k class-stratified folds.

    Every fold holds floor or ceil of (class size / k) rows of each class.

    Args:
        labels: 0/1 label per row
        k: Number of folds, >= 2
        seed: Shuffle seed

    Returns:
        k sorted index arrays, disjoint and jointly covering all rows

    Raises:
        DegenerateDataError: If k < 2 or a class has fewer than k members

    """
    labels = _labels(labels)
    if k < 2:  # noqa: PLR2004
        msg = f"k must be >= 2, got {k}"
        raise DegenerateDataError(msg)
    for label in LABELS:
        count = int((labels == label).sum())
        if count < k:
            msg = f"class {label} has {count} member(s), fewer than k={k} folds"
            raise DegenerateDataError(msg)
    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    placeholder = np.zeros((labels.size, 1))
    return [np.sort(test) for _, test in splitter.split(placeholder, labels)]


def _half_up(value: float) -> int:
    return int(np.floor(value + 0.5))


def split_40_30_30(
    labels: np.ndarray | list[int], seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stratified train/validation/test index split.

    Sizes are round(0.4 N), round(0.3 N) (halves rounded up) and the
    remainder; for N = 1008 that is 403/302/303.

    Args:
        labels: 0/1 label per row, N >= 10
        seed: Shuffle seed

    Returns:
        (train, val, test) sorted index arrays

    Raises:
        DegenerateDataError: If N < 10 or a class is too small to stratify

    """
    labels = _labels(labels)
    n = labels.size
    if n < MIN_SPLIT_ROWS:
        msg = f"split needs at least {MIN_SPLIT_ROWS} rows, got {n}"
        raise DegenerateDataError(msg)
    n_train = _half_up(TRAIN_FRACTION * n)
    n_val = _half_up(VAL_FRACTION * n)
    indices = np.arange(n)
    try:
        train, rest = train_test_split(
            indices, train_size=n_train, stratify=labels, random_state=seed
        )
        val, test = train_test_split(
            rest, train_size=n_val, stratify=labels[rest], random_state=seed
        )
    except ValueError as e:
        msg = f"Cannot stratify {n} rows into 40/30/30: {e}"
        raise DegenerateDataError(msg) from e
    return np.sort(train), np.sort(val), np.sort(test)
