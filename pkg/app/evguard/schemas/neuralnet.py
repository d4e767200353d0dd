"""Schemas for the three detector architectures and their training protocol."""

from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from app.evguard.schemas.features import FEATURE_DIM

DEFAULT_L1 = 1e-5
DEFAULT_L2 = 1e-5


class DnnSpec(BaseModel):
    """Fully connected network: input -> hidden ReLU layers -> 1 sigmoid unit."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["dnn"] = "dnn"
    input_dim: int = Field(default=FEATURE_DIM, ge=1)
    hidden: tuple[int, ...] = (64, 64)
    dropout: float = Field(default=0.0, ge=0.0, lt=1.0)
    l1: float = Field(default=DEFAULT_L1, ge=0.0)
    l2: float = Field(default=DEFAULT_L2, ge=0.0)

    @model_validator(mode="after")
    def check_hidden(self) -> "DnnSpec":
        """Hidden widths must be positive."""
        if any(width < 1 for width in self.hidden):
            msg = f"hidden layer widths must be positive, got {self.hidden}"
            raise ValueError(msg)
        return self


class ConvSpec(BaseModel):
    """One valid, stride-1 convolution stage."""

    model_config = ConfigDict(frozen=True)

    filters: int = Field(default=64, ge=1)
    kernel: int = Field(default=3, ge=1)


class CnnSpec(BaseModel):
    """1-D CNN: (conv -> ReLU -> max-pool) stages -> dense ReLU -> dropout -> 1 sigmoid unit."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["cnn"] = "cnn"
    input_len: int = Field(default=FEATURE_DIM, ge=1)
    channels_in: int = Field(default=1, ge=1)
    conv: tuple[ConvSpec, ...] = (ConvSpec(), ConvSpec())
    pool: int = Field(default=2, ge=1)
    fc: int = Field(default=128, ge=1)
    dropout: float = Field(default=0.5, ge=0.0, lt=1.0)
    l1: float = Field(default=0.0, ge=0.0)
    l2: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def check_shapes(self) -> "CnnSpec":
        """Every stage must leave at least one time step."""
        length = self.input_len
        for stage in self.conv:
            length = (length - stage.kernel + 1) // self.pool
            if length < 1:
                msg = (
                    f"conv/pool stages {[(s.filters, s.kernel) for s in self.conv]} "
                    f"shrink an input of length {self.input_len} to nothing"
                )
                raise ValueError(msg)
        return self

    def stage_lengths(self) -> list[int]:
        """Sequence length after each conv+pool stage (140 -> 69 -> 33)."""
        lengths = []
        length = self.input_len
        for stage in self.conv:
            length = (length - stage.kernel + 1) // self.pool
            lengths.append(length)
        return lengths

    @property
    def flat_dim(self) -> int:
        """Width of the flattened feature map fed to the dense layer."""
        channels = self.conv[-1].filters if self.conv else self.channels_in
        length = self.stage_lengths()[-1] if self.conv else self.input_len
        return channels * length


class LstmSpec(BaseModel):
    """Stacked LSTM over the feature vector read as a sequence of scalars."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["lstm"] = "lstm"
    seq_len: int = Field(default=FEATURE_DIM, ge=1)
    features_per_step: int = Field(default=1, ge=1)
    units_per_layer: tuple[int, ...] = (64, 64, 64)
    inter_layer_dropout: float = Field(default=0.1, ge=0.0, lt=1.0)
    l1: float = Field(default=0.0, ge=0.0)
    l2: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def check_units(self) -> "LstmSpec":
        """At least one layer, positive widths."""
        if not self.units_per_layer or any(u < 1 for u in self.units_per_layer):
            msg = f"units_per_layer must be non-empty and positive, got {self.units_per_layer}"
            raise ValueError(msg)
        return self

    @property
    def input_dim(self) -> int:
        """Flat input width (seq_len * features_per_step)."""
        return self.seq_len * self.features_per_step


ModelSpec = Annotated[DnnSpec | CnnSpec | LstmSpec, Field(discriminator="kind")]

model_spec_adapter: TypeAdapter[DnnSpec | CnnSpec | LstmSpec] = TypeAdapter(ModelSpec)

MODEL_KINDS = ("dnn", "cnn", "lstm")


def default_spec(kind: str) -> DnnSpec | CnnSpec | LstmSpec:
    """Default architecture of a model kind."""
    return model_spec_adapter.validate_python({"kind": kind})


def spec_input_dim(spec: DnnSpec | CnnSpec | LstmSpec) -> int:
    """Flat input width a spec expects."""
    if isinstance(spec, CnnSpec):
        return spec.input_len * spec.channels_in
    return spec.input_dim


class AdamConfig(BaseModel):
    """Adam hyperparameters."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=1e-3, gt=0.0)
    beta1: float = Field(default=0.9, gt=0.0, lt=1.0)
    beta2: float = Field(default=0.999, gt=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)


class TrainConfig(BaseModel):
    """Mini-batch training protocol.

    ``l1``/``l2`` override the spec's regularization coefficients when set.
    """

    model_config = ConfigDict(frozen=True)

    batch_size: int = Field(default=100, ge=1)
    epochs: int = Field(default=70, ge=1)
    adam: AdamConfig = Field(default_factory=AdamConfig)
    l1: float | None = Field(default=None, ge=0.0)
    l2: float | None = Field(default=None, ge=0.0)
    seed: int = 7
    shuffle: bool = True


class EpochRecord(BaseModel):
    """Losses and accuracies (threshold 0.5) after one epoch."""

    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float | None = None
    val_acc: float | None = None


class TrainHistory(BaseModel):
    """Per-epoch records plus wall-clock training time."""

    records: list[EpochRecord] = Field(default_factory=list)
    wall_time: float = Field(default=0.0, ge=0.0, description="seconds")

    def __len__(self) -> int:
        """Number of epochs recorded."""
        return len(self.records)

    @property
    def train_loss(self) -> list[float]:
        """Training loss per epoch."""
        return [r.train_loss for r in self.records]

    @property
    def val_acc(self) -> list[float | None]:
        """Validation accuracy per epoch."""
        return [r.val_acc for r in self.records]


@dataclass(eq=False)
class ModelParams:
    """Weights of a built model, keyed by tensor name in declaration order.

    Tensor names end in ``.weight``/``.W``/``.U`` for weight matrices and
    ``.bias`` for biases; only weights are regularized.
    """

    spec: DnnSpec | CnnSpec | LstmSpec
    seed: int
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __iter__(self) -> Iterator[tuple[str, np.ndarray]]:
        """(name, tensor) pairs in declaration order."""
        return iter(self.tensors.items())

    def __getitem__(self, name: str) -> np.ndarray:
        """Tensor by name."""
        return self.tensors[name]

    def __eq__(self, other: object) -> bool:
        """Exact equality of spec, seed and every tensor."""
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.seed == other.seed
            and list(self.tensors) == list(other.tensors)
            and all(np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def weight_names(self) -> list[str]:
        """Names of regularized tensors."""
        return [name for name in self.tensors if not name.endswith(".bias")]

    @property
    def num_parameters(self) -> int:
        """Total scalar count."""
        return sum(t.size for t in self.tensors.values())

    def shapes(self) -> dict[str, tuple[int, ...]]:
        """Tensor shapes in declaration order."""
        return {name: t.shape for name, t in self.tensors.items()}

    def weight_sum_squares(self) -> float:
        """Sum of squared weights (biases excluded)."""
        return float(sum(np.sum(self.tensors[n] ** 2) for n in self.weight_names))

    def replace(self, tensors: dict[str, np.ndarray]) -> "ModelParams":
        """Same spec and seed over new tensors."""
        return ModelParams(spec=self.spec, seed=self.seed, tensors=tensors)

    def copy(self) -> "ModelParams":
        """Deep copy of the tensors."""
        return self.replace({name: t.copy() for name, t in self.tensors.items()})
