"""Network assembly, forward/backward passes and the regularized BCE loss.

All three architectures end in a single logit passed through a sigmoid, so the
output probability is read as P(normal) (label 1).
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from app.evguard.schemas.errors import ShapeMismatchError
from app.evguard.schemas.neuralnet import (
    CnnSpec,
    DnnSpec,
    LstmSpec,
    ModelParams,
    spec_input_dim,
)
from app.evguard.services.neuralnet.layers import (
    LSTM,
    Conv1D,
    Dense,
    Dropout,
    LastStep,
    Layer,
    MaxPool1D,
    ReLU,
    Reshape,
)

BCE_EPSILON = 1e-7
# Keeps sigmoid outputs strictly inside (0, 1) in float64
_PROB_MIN = np.finfo(np.float64).tiny
_PROB_MAX = np.nextafter(1.0, 0.0)


class Sequential:
    """Ordered layer stack producing one logit per row."""

    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def declare(self) -> dict[str, tuple[int, ...]]:
        """Every tensor of every layer, in declaration order."""
        shapes: dict[str, tuple[int, ...]] = {}
        for layer in self.layers:
            shapes.update(layer.declare())
        return shapes

    def initialize(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """Draw all tensors layer by layer."""
        tensors: dict[str, np.ndarray] = {}
        for layer in self.layers:
            tensors.update(layer.initialize(rng))
        return tensors

    def bind(self, tensors: dict[str, np.ndarray]) -> "Sequential":
        """Attach parameter tensors to the layers."""
        for layer in self.layers:
            layer.bind(tensors)
        return self

    def forward(
        self, x: np.ndarray, *, training: bool, rng: np.random.Generator | None
    ) -> np.ndarray:
        """Logits of shape (B,)."""
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x[:, 0]

    def backward(self, grad_logits: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients given d(loss)/d(logit) of shape (B,)."""
        grad = grad_logits[:, None]
        grads: dict[str, np.ndarray] = {}
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
            grads.update(layer.grads)
        return grads

    def pattern(self) -> bytes:
        """Concatenated piecewise-linear branch patterns of the last forward pass."""
        return b"".join(layer.pattern() for layer in self.layers)

    def __repr__(self) -> str:
        """Layer list."""
        return "Sequential(" + ", ".join(repr(layer) for layer in self.layers) + ")"


def _dnn_layers(spec: DnnSpec) -> list[Layer]:
    layers: list[Layer] = []
    width = spec.input_dim
    for index, hidden in enumerate(spec.hidden, start=1):
        layers.append(Dense(f"dense{index}", width, hidden, init="he"))
        layers.append(ReLU(f"relu{index}"))
        if spec.dropout > 0.0:
            layers.append(Dropout(f"dropout{index}", spec.dropout))
        width = hidden
    layers.append(Dense("output", width, 1, init="lecun"))
    return layers


def _cnn_layers(spec: CnnSpec) -> list[Layer]:
    layers: list[Layer] = [Reshape("as_sequence", (spec.input_len, spec.channels_in))]
    channels = spec.channels_in
    for index, stage in enumerate(spec.conv, start=1):
        layers.append(Conv1D(f"conv{index}", channels, stage.filters, stage.kernel))
        layers.append(ReLU(f"conv_relu{index}"))
        layers.append(MaxPool1D(f"pool{index}", spec.pool))
        channels = stage.filters
    layers.append(Reshape("flatten", (spec.flat_dim,)))
    layers.append(Dense("fc", spec.flat_dim, spec.fc, init="he"))
    layers.append(ReLU("fc_relu"))
    layers.append(Dropout("fc_dropout", spec.dropout))
    layers.append(Dense("output", spec.fc, 1, init="lecun"))
    return layers


def _lstm_layers(spec: LstmSpec) -> list[Layer]:
    layers: list[Layer] = [Reshape("as_sequence", (spec.seq_len, spec.features_per_step))]
    width = spec.features_per_step
    for index, units in enumerate(spec.units_per_layer, start=1):
        if index > 1 and spec.inter_layer_dropout > 0.0:
            layers.append(Dropout(f"lstm_dropout{index - 1}", spec.inter_layer_dropout))
        layers.append(LSTM(f"lstm{index}", width, units))
        width = units
    layers.append(LastStep("last_step"))
    layers.append(Dense("output", width, 1, init="lecun"))
    return layers


def network_for(spec: DnnSpec | CnnSpec | LstmSpec) -> Sequential:
    """Unbound layer stack of an architecture."""
    if isinstance(spec, DnnSpec):
        return Sequential(_dnn_layers(spec))
    if isinstance(spec, CnnSpec):
        return Sequential(_cnn_layers(spec))
    return Sequential(_lstm_layers(spec))


def build(spec: DnnSpec | CnnSpec | LstmSpec, seed: int) -> ModelParams:
    """Initialize parameters for a spec.

    Weights feeding a ReLU are He-uniform, the rest LeCun-uniform; biases are
    zero except LSTM forget gates (1). Equal seeds give equal parameters.

    Args:
        spec: Architecture
        seed: Initialization seed

    Returns:
        ModelParams with tensors in declaration order

    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return ModelParams(spec=spec, seed=seed, tensors=network_for(spec).initialize(rng))


@dataclass
class ForwardState:
    """A forward pass kept for the matching backward pass."""

    network: Sequential
    logits: np.ndarray
    probs: np.ndarray


def _check_batch(params: ModelParams, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    expected = spec_input_dim(params.spec)
    if batch.ndim != 2 or batch.shape[1] != expected:  # noqa: PLR2004
        msg = f"batch must have shape (B, {expected}), got {batch.shape}"
        raise ShapeMismatchError(msg)
    return batch


def run_forward(
    params: ModelParams, batch: np.ndarray, *, training: bool = False, seed: int = 0
) -> ForwardState:
    """Forward pass that keeps the state ``backward`` needs.

    Raises:
        ShapeMismatchError: If the batch is not (B, input_dim)

    """
    batch = _check_batch(params, batch)
    network = network_for(params.spec).bind(params.tensors)
    rng = np.random.default_rng(np.random.SeedSequence(seed)) if training else None
    logits = network.forward(batch, training=training, rng=rng)
    probs = np.clip(expit(logits), _PROB_MIN, _PROB_MAX)
    return ForwardState(network=network, logits=logits, probs=probs)


def forward(
    params: ModelParams, batch: np.ndarray, *, training: bool = False, seed: int = 0
) -> np.ndarray:
    """P(normal) for every row of a (B, 140) batch.

    Args:
        params: Model parameters
        batch: Scaled feature rows
        training: Enables dropout (inverted, masks drawn from ``seed``)
        seed: Dropout mask seed; ignored at inference

    Returns:
        (B,) probabilities strictly inside (0, 1)

    Raises:
        ShapeMismatchError: If the batch is not (B, input_dim)

    """
    return run_forward(params, batch, training=training, seed=seed).probs


def regularization(
    params: ModelParams, l1: float | None = None, l2: float | None = None
) -> tuple[float, float]:
    """Effective (l1, l2): explicit values win over the spec's defaults."""
    return (
        params.spec.l1 if l1 is None else l1,
        params.spec.l2 if l2 is None else l2,
    )


def loss(
    probs: np.ndarray,
    labels: np.ndarray,
    params: ModelParams | None = None,
    l1: float = 0.0,
    l2: float = 0.0,
) -> float:
    """Mean binary cross-entropy plus L1/L2 penalties on weight tensors.

    Probabilities are clipped to [1e-7, 1 - 1e-7] before the logs.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        msg = f"probs {probs.shape} and labels {labels.shape} differ in shape"
        raise ShapeMismatchError(msg)
    clipped = np.clip(probs, BCE_EPSILON, 1.0 - BCE_EPSILON)
    bce = -np.mean(labels * np.log(clipped) + (1.0 - labels) * np.log(1.0 - clipped))
    penalty = 0.0
    if params is not None and (l1 or l2):
        for name in params.weight_names:
            weight = params[name]
            penalty += l1 * np.abs(weight).sum() + l2 * np.square(weight).sum()
    return float(bce + penalty)


def backward(
    params: ModelParams,
    batch: np.ndarray,
    labels: np.ndarray,
    state: ForwardState,
    l1: float = 0.0,
    l2: float = 0.0,
) -> dict[str, np.ndarray]:
    """Gradients of ``loss`` w.r.t. every tensor, for the pass held in ``state``.

    The L1 term contributes l1*sign(w) (0 at w = 0), the L2 term 2*l2*w.
    Where clipping flattened the loss the BCE gradient is zero.

    Raises:
        ShapeMismatchError: If labels or state do not match the batch

    """
    batch = _check_batch(params, batch)
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != (batch.shape[0],) or state.probs.shape != labels.shape:
        msg = (
            f"labels {labels.shape} / forward state {state.probs.shape} do not "
            f"match a batch of {batch.shape[0]}"
        )
        raise ShapeMismatchError(msg)
    probs = state.probs
    inside = (probs >= BCE_EPSILON) & (probs <= 1.0 - BCE_EPSILON)
    grad_logits = np.where(inside, probs - labels, 0.0) / batch.shape[0]
    grads = state.network.backward(grad_logits)
    if l1 or l2:
        for name in params.weight_names:
            weight = params[name]
            grads[name] = grads[name] + l1 * np.sign(weight) + 2.0 * l2 * weight
    return {name: grads[name] for name in params.tensors}
