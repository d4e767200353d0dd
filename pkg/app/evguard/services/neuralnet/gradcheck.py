"""Central finite-difference check of the analytic gradients."""

import logging

import numpy as np

from app.evguard.core.config import settings
from app.evguard.schemas.features import Dataset
from app.evguard.schemas.neuralnet import CnnSpec, DnnSpec, LstmSpec, ModelParams
from app.evguard.services.neuralnet.network import (
    backward,
    build,
    loss,
    regularization,
    run_forward,
)

logger = logging.getLogger(__name__)

RELATIVE_ERROR_FLOOR = 1e-6


def _loss_and_pattern(
    params: ModelParams, features: np.ndarray, labels: np.ndarray, l1: float, l2: float
) -> tuple[float, bytes]:
    state = run_forward(params, features, training=False)
    return loss(state.probs, labels, params, l1, l2), state.network.pattern()


def relative_error(analytic: float, numeric: float) -> float:
    """|a - n| / max(|a| + |n|, 1e-6)."""
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), RELATIVE_ERROR_FLOOR)


def gradient_check(
    spec: DnnSpec | CnnSpec | LstmSpec,
    sample: Dataset | tuple[np.ndarray, np.ndarray],
    eps: float = 1e-5,
    *,
    seed: int = 0,
    coordinates: int | None = None,
    params: ModelParams | None = None,
) -> float:
    """Worst relative error between backprop and central differences.

    Dropout is disabled. For every tensor, ``coordinates`` entries (all of them
    if the tensor is smaller) are perturbed by +/-eps. A coordinate whose
    perturbation flips a ReLU or max-pool branch, or crosses the L1 kink, is
    skipped since the loss is not differentiable across it.

    Args:
        spec: Architecture
        sample: Small labelled batch (rows of the model's input width)
        eps: Finite-difference step
        seed: Seed for initialization and coordinate sampling
        coordinates: Coordinates per tensor (defaults to the configured 200)
        params: Parameters to check at (defaults to ``build(spec, seed)``)

    Returns:
        Maximum relative error over all checked coordinates

    """
    if isinstance(sample, Dataset):
        features, labels = sample.features, sample.labels.astype(np.float64)
    else:
        features = np.asarray(sample[0], dtype=np.float64)
        labels = np.asarray(sample[1], dtype=np.float64)
    coordinates = coordinates or settings.gradient_check_coordinates
    params = (params or build(spec, seed)).copy()
    l1, l2 = regularization(params)

    state = run_forward(params, features, training=False)
    analytic = backward(params, features, labels, state, l1, l2)
    base_pattern = state.network.pattern()

    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    worst = 0.0
    checked = skipped = 0
    for name, tensor in params:
        flat = tensor.reshape(-1)
        if flat.size <= coordinates:
            picks = np.arange(flat.size)
        else:
            picks = rng.choice(flat.size, size=coordinates, replace=False)
        grad_flat = analytic[name].reshape(-1)
        regularized = name in params.weight_names and l1 > 0.0
        for index in picks:
            original = flat[index]
            if regularized and abs(original) <= eps:
                skipped += 1
                continue
            flat[index] = original + eps
            loss_plus, pattern_plus = _loss_and_pattern(params, features, labels, l1, l2)
            flat[index] = original - eps
            loss_minus, pattern_minus = _loss_and_pattern(params, features, labels, l1, l2)
            flat[index] = original
            if pattern_plus != base_pattern or pattern_minus != base_pattern:
                skipped += 1
                continue
            numeric = (loss_plus - loss_minus) / (2.0 * eps)
            worst = max(worst, relative_error(float(grad_flat[index]), numeric))
            checked += 1

    if skipped:
        msg = f"Gradient check skipped {skipped} non-differentiable coordinate(s)"
        logger.warning(msg)
    msg = f"[{spec.kind}] gradient check over {checked} coordinates: max rel. error {worst:.3e}"
    logger.info(msg)
    return worst
