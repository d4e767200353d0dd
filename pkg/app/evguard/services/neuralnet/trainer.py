"""Mini-batch Adam training loop."""

import logging
import time
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.evguard.core.config import settings
from app.evguard.schemas.errors import ConfigurationError, ShapeMismatchError
from app.evguard.schemas.features import Dataset
from app.evguard.schemas.neuralnet import (
    CnnSpec,
    DnnSpec,
    EpochRecord,
    LstmSpec,
    ModelParams,
    TrainConfig,
    TrainHistory,
)
from app.evguard.services.neuralnet.network import (
    backward,
    build,
    forward,
    loss,
    regularization,
    run_forward,
)
from app.evguard.services.neuralnet.optimizer import AdamState, adam_step

logger = logging.getLogger(__name__)

# Large enough for any evaluation batch, small enough to bound LSTM caches
EVAL_CHUNK = 512

Split = Dataset | tuple[np.ndarray, np.ndarray]


def build_train_config(values: TrainConfig | Mapping[str, Any] | None = None) -> TrainConfig:
    """Validate a TrainConfig, signalling problems as ConfigurationError."""
    if isinstance(values, TrainConfig):
        return values
    try:
        return TrainConfig.model_validate(dict(values or {}))
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(loc) for loc in first["loc"]) or "config"
        msg = f"Invalid training config ({field}): {first['msg']}"
        raise ConfigurationError(msg) from e


def _arrays(split: Split) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(split, Dataset):
        return split.features, split.labels.astype(np.float64)
    features, labels = split
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if features.ndim != 2 or labels.shape != (features.shape[0],):  # noqa: PLR2004
        msg = f"features {features.shape} and labels {labels.shape} do not align"
        raise ShapeMismatchError(msg)
    return features, labels


def predict(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Inference-mode P(normal) for any number of rows."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] == 0:
        return np.empty(0)
    return np.concatenate(
        [
            forward(params, features[start : start + EVAL_CHUNK], training=False)
            for start in range(0, features.shape[0], EVAL_CHUNK)
        ]
    )


def evaluate_split(
    params: ModelParams, split: Split, l1: float = 0.0, l2: float = 0.0
) -> tuple[float, float]:
    """(loss, accuracy at threshold 0.5) with dropout disabled."""
    features, labels = _arrays(split)
    probs = predict(params, features)
    accuracy = float(np.mean((probs >= 0.5) == (labels == 1.0)))  # noqa: PLR2004
    return loss(probs, labels, params, l1, l2), accuracy


def train(
    spec: DnnSpec | CnnSpec | LstmSpec,
    train_set: Split,
    val_set: Split | None,
    cfg: TrainConfig | Mapping[str, Any] | None = None,
) -> tuple[ModelParams, TrainHistory]:
    """Train a model with mini-batch Adam.

    Each epoch reshuffles the rows with a generator seeded by (seed, epoch);
    each batch draws its dropout masks from (seed, epoch, batch). Parameters
    are initialized from ``cfg.seed``, so the whole run is deterministic.

    Args:
        spec: Architecture
        train_set: Scaled, labelled training rows
        val_set: Optional validation rows for the history
        cfg: Training protocol

    Returns:
        (trained parameters, per-epoch history with wall time)

    Raises:
        ConfigurationError: If the configuration is invalid
        ShapeMismatchError: If the data does not fit the architecture

    """
    cfg = build_train_config(cfg)
    if cfg.epochs < 1:
        msg = f"epochs must be >= 1, got {cfg.epochs}"
        raise ConfigurationError(msg)
    features, labels = _arrays(train_set)
    if features.shape[0] == 0:
        msg = "Training set is empty"
        raise ConfigurationError(msg)

    params = build(spec, cfg.seed)
    l1, l2 = regularization(params, cfg.l1, cfg.l2)
    adam = AdamState.zeros_like(params)
    history: list[EpochRecord] = []
    n_rows = features.shape[0]
    step = 0

    started = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        if cfg.shuffle:
            order = np.random.default_rng(
                np.random.SeedSequence([cfg.seed, epoch])
            ).permutation(n_rows)
        else:
            order = np.arange(n_rows)
        for batch_index, start in enumerate(range(0, n_rows, cfg.batch_size)):
            rows = order[start : start + cfg.batch_size]
            mask_seed = int(
                np.random.SeedSequence([cfg.seed, epoch, batch_index]).generate_state(1)[0]
            )
            state = run_forward(params, features[rows], training=True, seed=mask_seed)
            grads = backward(params, features[rows], labels[rows], state, l1, l2)
            step += 1
            params, adam = adam_step(params, grads, adam, step, cfg.adam)

        train_loss, train_acc = evaluate_split(params, (features, labels), l1, l2)
        record = EpochRecord(epoch=epoch, train_loss=train_loss, train_acc=train_acc)
        if val_set is not None:
            record.val_loss, record.val_acc = evaluate_split(params, val_set, l1, l2)
        history.append(record)
        if epoch % settings.epoch_log_interval == 0 or epoch == cfg.epochs:
            msg = (
                f"[{spec.kind}] epoch {epoch}/{cfg.epochs}: loss={train_loss:.4f} "
                f"acc={train_acc:.4f}"
                + (
                    f" val_loss={record.val_loss:.4f} val_acc={record.val_acc:.4f}"
                    if record.val_loss is not None
                    else ""
                )
            )
            logger.info(msg)
    wall_time = time.perf_counter() - started

    msg = f"[{spec.kind}] trained {cfg.epochs} epochs in {wall_time:.3f}s"
    logger.info(msg)
    return params, TrainHistory(records=history, wall_time=wall_time)


def write_history_csv(history: TrainHistory, path: str | Path) -> Path:
    """Write ``epoch,train_loss,train_acc,val_loss,val_acc``."""
    path = Path(path)
    frame = pd.DataFrame([record.model_dump() for record in history.records])
    frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path
