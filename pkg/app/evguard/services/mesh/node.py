"""Detection node behaviour: online inference and the mitigation state machine."""

import dataclasses
import logging

import numpy as np

from app.evguard.schemas.errors import ConfigurationError, DatasetFormatError, ErrorCode
from app.evguard.schemas.features import FEATURE_DIM, FeatureVector
from app.evguard.schemas.mesh import (
    CRITICAL_SCORE,
    HIGH_SCORE,
    SEVERITY_MITIGATION,
    Alert,
    NodeState,
    Severity,
)
from app.evguard.services.neuralnet.trainer import predict

logger = logging.getLogger(__name__)


def severity_for(score: float) -> Severity:
    """Band a ransomware score: Low below 0.9, High below 0.99, else Critical."""
    if score >= CRITICAL_SCORE:
        return Severity.CRITICAL
    if score >= HIGH_SCORE:
        return Severity.HIGH
    return Severity.LOW


def ransomware_score(node: NodeState, vector: np.ndarray | FeatureVector) -> float:
    """1 - P(normal) for one scaled vector, through the offline ``predict`` path.

    Raises:
        ConfigurationError: If the node has no model
        DatasetFormatError: If the vector is mis-sized or not scaled

    """
    if node.model is None:
        msg = f"Node {node.node_id} has no trained model"
        raise ConfigurationError(msg)
    if isinstance(vector, FeatureVector):
        values = vector.values
    else:
        values = np.asarray(vector, dtype=np.float64)
    if values.shape != (FEATURE_DIM,):
        msg = (
            f"Node {node.node_id} expects a {FEATURE_DIM}-value vector, "
            f"got shape {values.shape}"
        )
        raise DatasetFormatError(msg, error_code=ErrorCode.SHAPE_MISMATCH)
    minmax = node.scaler is None or node.scaler.kind == "minmax"
    if not np.isfinite(values).all() or (minmax and ((values < 0.0) | (values > 1.0)).any()):
        msg = f"Node {node.node_id} received an unscaled vector (values outside [0, 1])"
        raise DatasetFormatError(msg, error_code=ErrorCode.INVALID_CELL)
    return 1.0 - float(predict(node.model, values[None, :])[0])


def ingest_sample(
    node: NodeState,
    vector: np.ndarray | FeatureVector,
    now: int,
    *,
    sequence: int = 0,
) -> Alert | None:
    """Score a sample and raise an alert when it looks like ransomware.

    Args:
        node: Detection node holding a trained model
        vector: 140 scaled values
        now: Logical tick
        sequence: Per-run ingest counter; makes alert ids unique

    Returns:
        Alert iff the ransomware score reaches the node threshold, else None

    Raises:
        ConfigurationError: If the node has no model
        DatasetFormatError: If the vector is mis-sized or not scaled

    """
    return raise_alert(node, ransomware_score(node, vector), now, sequence=sequence)


def raise_alert(node: NodeState, score: float, now: int, *, sequence: int = 0) -> Alert | None:
    """Alert for an already computed ransomware score, or None below the threshold."""
    if score < node.threshold:
        return None
    alert = Alert(
        alert_id=f"{node.node_id}@{now}#{sequence}",
        origin=node.node_id,
        detected_at=now,
        score=min(max(score, 0.0), 1.0),
        severity=severity_for(score),
    )
    msg = f"{node.node_id} raised {alert.alert_id} ({alert.severity.value}, score {score:.4f})"
    logger.info(msg)
    return alert


def handle_alert(node: NodeState, alert: Alert) -> NodeState:
    """Record an alert and escalate; a repeated alert_id leaves the state untouched."""
    if alert.alert_id in node.seen_alerts:
        return node
    required = SEVERITY_MITIGATION[alert.severity]
    mitigation = required if required.level > node.mitigation.level else node.mitigation
    return dataclasses.replace(
        node,
        mitigation=mitigation,
        seen_alerts=node.seen_alerts | {alert.alert_id},
    )
