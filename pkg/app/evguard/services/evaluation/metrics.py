"""Threshold metrics and the rank-based ROC AUC.

Scores are the model's P(normal); ransomware (label 0) is the positive class,
so a sample is flagged as ransomware when its score falls strictly below the
threshold.
"""

import logging
from typing import Literal

import numpy as np
from scipy.stats import rankdata

from app.evguard.schemas.errors import DegenerateDataError, ShapeMismatchError
from app.evguard.schemas.evaluation import Confusion, MetricSet, MetricSummary
from app.evguard.schemas.features import NORMAL_LABEL, RANSOMWARE_LABEL

logger = logging.getLogger(__name__)


def _aligned(
    scores: np.ndarray | list[float], labels: np.ndarray | list[int]
) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        msg = f"scores {scores.shape} and labels {labels.shape} must be equal-length vectors"
        raise ShapeMismatchError(msg)
    return scores, labels


def confusion_at(
    scores: np.ndarray | list[float],
    labels: np.ndarray | list[int],
    threshold: float = 0.5,
) -> Confusion:
    """Tally the confusion of ``score < threshold`` -> ransomware.

    Raises:
        ShapeMismatchError: If scores and labels differ in length

    """
    scores, labels = _aligned(scores, labels)
    flagged = scores < threshold
    ransomware = labels == RANSOMWARE_LABEL
    return Confusion(
        tp=int(np.sum(flagged & ransomware)),
        fp=int(np.sum(flagged & ~ransomware)),
        tn=int(np.sum(~flagged & ~ransomware)),
        fn=int(np.sum(~flagged & ransomware)),
    )


def _ratio(numerator: int | float, denominator: int | float, name: str, flags: list[str]) -> float:
    if denominator == 0:
        flags.append(name)
        return 0.0
    return numerator / denominator


def metrics(confusion: Confusion) -> MetricSet:
    """acc, precision, recall, F1 and FAR = fp / (fp + tn).

    Any 0/0 is defined as 0 and named in ``degenerate``.
    """
    flags: list[str] = []
    c = confusion
    precision = _ratio(c.tp, c.tp + c.fp, "precision", flags)
    recall = _ratio(c.tp, c.tp + c.fn, "recall", flags)
    f1 = _ratio(2.0 * precision * recall, precision + recall, "f1", flags)
    far = _ratio(c.fp, c.fp + c.tn, "far", flags)
    if flags:
        msg = f"Degenerate metrics set to 0: {', '.join(flags)} for {c.model_dump()}"
        logger.warning(msg)
    return MetricSet(
        acc=(c.tp + c.tn) / c.n,
        precision=precision,
        recall=recall,
        f1=f1,
        far=far,
        degenerate=tuple(flags),
    )


def roc_auc(
    scores: np.ndarray | list[float],
    labels: np.ndarray | list[int],
    *,
    score_kind: Literal["normal", "ransomware"] = "normal",
) -> float:
    """Mann-Whitney AUC: P(ransomware scores as more ransomware-like), ties half.

    Args:
        scores: Model scores; P(normal) by default
        labels: 0 = ransomware, 1 = normal
        score_kind: "ransomware" when higher scores already mean more
            ransomware-like

    Returns:
        (#concordant + 0.5 #tied) / (#ransomware * #normal)

    Raises:
        DegenerateDataError: If only one class is present
        ShapeMismatchError: If scores and labels differ in length

    """
    scores, labels = _aligned(scores, labels)
    positive = labels == RANSOMWARE_LABEL
    n_pos = int(positive.sum())
    n_neg = int((labels == NORMAL_LABEL).sum())
    if n_pos == 0 or n_neg == 0:
        msg = "AUC needs both ransomware and normal samples"
        raise DegenerateDataError(msg)
    oriented = -scores if score_kind == "normal" else scores
    ranks = rankdata(oriented, method="average")
    u_statistic = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_statistic / (n_pos * n_neg))


def summarize(values: list[float] | np.ndarray) -> MetricSummary:
    """Mean, population std, min and max."""
    values = np.asarray(values, dtype=np.float64)
    low, high = float(values.min()), float(values.max())
    return MetricSummary(
        mean=min(max(float(values.mean()), low), high),
        std=float(values.std()),
        min=low,
        max=high,
    )
