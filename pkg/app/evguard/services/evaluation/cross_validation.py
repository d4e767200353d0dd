"""Stratified k-fold cross-validation and the single 40/30/30 experiment."""

import logging
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from typing import Any

import numpy as np

from app.evguard.core.config import settings
from app.evguard.schemas.evaluation import (
    METRIC_NAMES,
    CvReport,
    FoldReport,
    SplitReport,
)
from app.evguard.schemas.features import Dataset
from app.evguard.schemas.neuralnet import (
    CnnSpec,
    DnnSpec,
    LstmSpec,
    ModelParams,
    TrainConfig,
)
from app.evguard.services.evaluation.metrics import (
    confusion_at,
    metrics,
    roc_auc,
    summarize,
)
from app.evguard.services.evaluation.splits import split_40_30_30, stratified_folds
from app.evguard.services.neuralnet.trainer import build_train_config, predict, train

logger = logging.getLogger(__name__)


def _fold_report(
    fold_index: int,
    spec: DnnSpec | CnnSpec | LstmSpec,
    dataset: Dataset,
    folds: list[np.ndarray],
    cfg: TrainConfig,
) -> FoldReport:
    held_out = folds[fold_index]
    train_rows = np.concatenate([fold for i, fold in enumerate(folds) if i != fold_index])
    train_set = dataset.subset(np.sort(train_rows))
    test_set = dataset.subset(held_out)

    params, history = train(spec, train_set, None, cfg)
    scores = predict(params, test_set.features)
    confusion = confusion_at(scores, test_set.labels)
    metric_set = metrics(confusion)
    report = FoldReport(
        fold_index=fold_index,
        confusion=confusion,
        acc=metric_set.acc,
        precision=metric_set.precision,
        recall=metric_set.recall,
        f1=metric_set.f1,
        far=metric_set.far,
        auc=roc_auc(scores, test_set.labels),
        train_time=history.wall_time,
        n_train=len(train_set),
        n_test=len(test_set),
        degenerate=metric_set.degenerate,
    )
    msg = (
        f"[{spec.kind}] fold {fold_index + 1}/{len(folds)}: acc={report.acc:.4f} "
        f"auc={report.auc:.4f} train_time={report.train_time:.2f}s"
    )
    logger.info(msg)
    return report


def cross_validate(
    spec: DnnSpec | CnnSpec | LstmSpec,
    dataset: Dataset,
    k: int = 10,
    cfg: TrainConfig | Mapping[str, Any] | None = None,
    *,
    jobs: int | None = None,
) -> CvReport:
    """Train on k-1 folds and score the held-out fold, for every fold.

    Folds are built from ``cfg.seed``. Folds may train concurrently; results
    are aggregated in fold order, so the report does not depend on ``jobs``.

    Args:
        spec: Architecture
        dataset: Scaled, labelled rows
        k: Number of folds
        cfg: Training protocol
        jobs: Worker threads (defaults to the configured cv_jobs)

    Returns:
        CvReport with per-fold reports and mean / population std per metric

    Raises:
        DegenerateDataError: If a class has fewer than k rows
        ConfigurationError: If the training configuration is invalid

    """
    cfg = build_train_config(cfg)
    folds = stratified_folds(dataset.labels, k, cfg.seed)
    jobs = jobs or settings.cv_jobs

    def _run(index: int) -> FoldReport:
        return _fold_report(index, spec, dataset, folds, cfg)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run, range(k)))
    else:
        reports = [_run(index) for index in range(k)]

    summary = {name: summarize([r.metric(name) for r in reports]) for name in METRIC_NAMES}
    report = CvReport(
        model=spec.kind,
        k=k,
        seed=cfg.seed,
        folds=reports,
        summary=summary,
        train_time=summarize([r.train_time for r in reports]),
    )
    msg = (
        f"[{spec.kind}] {k}-fold CV: acc={summary['acc'].mean:.4f}+/-{summary['acc'].std:.4f} "
        f"auc={summary['auc'].mean:.4f}+/-{summary['auc'].std:.4f}"
    )
    logger.info(msg)
    return report


def run_single_experiment(
    spec: DnnSpec | CnnSpec | LstmSpec,
    dataset: Dataset,
    cfg: TrainConfig | Mapping[str, Any] | None = None,
) -> tuple[ModelParams, SplitReport]:
    """Train on 40 %, track validation on 30 %, report metrics on the last 30 %.

    Args:
        spec: Architecture
        dataset: Scaled, labelled rows (N >= 10)
        cfg: Training protocol; its seed also drives the split

    Returns:
        (trained parameters, SplitReport with history and test metrics)

    """
    cfg = build_train_config(cfg)
    train_idx, val_idx, test_idx = split_40_30_30(dataset.labels, cfg.seed)
    train_set = dataset.subset(train_idx)
    val_set = dataset.subset(val_idx)
    test_set = dataset.subset(test_idx)

    params, history = train(spec, train_set, val_set, cfg)
    scores = predict(params, test_set.features)
    confusion = confusion_at(scores, test_set.labels)
    report = SplitReport(
        model=spec.kind,
        seed=cfg.seed,
        sizes={"train": len(train_set), "val": len(val_set), "test": len(test_set)},
        confusion=confusion,
        metrics=metrics(confusion),
        auc=roc_auc(scores, test_set.labels),
        history=history,
    )
    msg = (
        f"[{spec.kind}] 40/30/30 experiment: test acc={report.metrics.acc:.4f} "
        f"auc={report.auc:.4f}"
    )
    logger.info(msg)
    return params, report
