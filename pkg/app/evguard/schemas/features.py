"""Schemas for opcode-frequency features.

A feature vector has one slot per tracked mnemonic followed by one slot per
instruction group. Labels follow the dataset convention 0 = ransomware,
1 = normal.
"""

from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

FEATURE_DIM = 140
RANSOMWARE_LABEL = 0
NORMAL_LABEL = 1
LABELS = (RANSOMWARE_LABEL, NORMAL_LABEL)


class FeatureLayout(BaseModel):
    """Slot order of the feature vector and the mnemonic -> group mapping.

    ``group_of`` may also map mnemonics that have no individual slot; they only
    contribute to their group. Mnemonics absent from ``group_of`` fall into the
    catch-all group.
    """

    model_config = ConfigDict(frozen=True)

    mnemonic_slots: tuple[str, ...]
    group_slots: tuple[str, ...]
    group_of: dict[str, str]
    catch_all: str = "misc"

    @model_validator(mode="after")
    def check_layout(self) -> "FeatureLayout":
        """Check the 140-slot contract and the group mapping."""
        total = len(self.mnemonic_slots) + len(self.group_slots)
        if total != FEATURE_DIM:
            msg = (
                f"layout has {len(self.mnemonic_slots)} mnemonic + "
                f"{len(self.group_slots)} group slots = {total}, expected {FEATURE_DIM}"
            )
            raise ValueError(msg)
        if len(set(self.mnemonic_slots)) != len(self.mnemonic_slots):
            msg = "duplicate mnemonic slot in layout"
            raise ValueError(msg)
        if len(set(self.group_slots)) != len(self.group_slots):
            msg = "duplicate group slot in layout"
            raise ValueError(msg)
        if self.catch_all not in self.group_slots:
            msg = f"catch-all group {self.catch_all!r} is not a declared group"
            raise ValueError(msg)
        for mnemonic in self.mnemonic_slots:
            if mnemonic not in self.group_of:
                msg = f"mnemonic slot {mnemonic!r} has no group"
                raise ValueError(msg)
        for mnemonic, group in self.group_of.items():
            if group not in self.group_slots:
                msg = f"mnemonic {mnemonic!r} maps to undeclared group {group!r}"
                raise ValueError(msg)
        return self

    @property
    def dim(self) -> int:
        """Vector length."""
        return len(self.mnemonic_slots) + len(self.group_slots)

    @property
    def column_names(self) -> list[str]:
        """Dataset CSV feature column names f0..f139."""
        return [f"f{i}" for i in range(self.dim)]

    def slot_index(self) -> dict[str, int]:
        """Mnemonic -> slot index."""
        return {m: i for i, m in enumerate(self.mnemonic_slots)}

    def group_index(self) -> dict[str, int]:
        """Group -> slot index (offset past the mnemonic slots)."""
        offset = len(self.mnemonic_slots)
        return {g: offset + i for i, g in enumerate(self.group_slots)}

    def group_for(self, mnemonic: str) -> str:
        """Group of a mnemonic, falling back to the catch-all."""
        return self.group_of.get(mnemonic, self.catch_all)

    def members(self, group: str) -> tuple[list[str], list[str]]:
        """(slotted, group-only) mnemonics of a group, in layout order."""
        slotted = [m for m in self.mnemonic_slots if self.group_of[m] == group]
        slotted_set = set(slotted)
        group_only = [
            m for m, g in self.group_of.items() if g == group and m not in slotted_set
        ]
        return slotted, group_only


@dataclass(frozen=True)
class InstructionTrace:
    """Lower-cased mnemonics of an execution trace, in order."""

    mnemonics: list[str] = field(default_factory=list)
    skipped_lines: int = 0

    def __len__(self) -> int:
        """Number of instructions."""
        return len(self.mnemonics)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """140 raw counts or scaled values, with an optional label."""

    values: np.ndarray
    label: int | None = None

    def __post_init__(self) -> None:
        """Check length and label domain."""
        if self.values.shape != (FEATURE_DIM,):
            msg = f"feature vector must have shape ({FEATURE_DIM},), got {self.values.shape}"
            raise ValueError(msg)
        if self.label is not None and self.label not in LABELS:
            msg = f"label must be 0 (ransomware) or 1 (normal), got {self.label}"
            raise ValueError(msg)

    def __eq__(self, other: object) -> bool:
        """Exact equality of values and label."""
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled feature matrix sharing one layout.

    Attributes:
        features: (N, 140) float64 matrix
        labels: (N,) int64 labels in {0, 1}
        layout: Layout all rows conform to

    """

    features: np.ndarray
    labels: np.ndarray
    layout: FeatureLayout

    def __post_init__(self) -> None:
        """Check shapes and label domain."""
        if self.features.ndim != 2 or self.features.shape[1] != self.layout.dim:  # noqa: PLR2004
            msg = f"features must be (N, {self.layout.dim}), got {self.features.shape}"
            raise ValueError(msg)
        if self.labels.shape != (self.features.shape[0],):
            msg = (
                f"labels shape {self.labels.shape} does not match "
                f"{self.features.shape[0]} rows"
            )
            raise ValueError(msg)
        if not np.isin(self.labels, LABELS).all():
            msg = "labels must be 0 (ransomware) or 1 (normal)"
            raise ValueError(msg)

    def __len__(self) -> int:
        """Number of rows."""
        return self.features.shape[0]

    def __iter__(self) -> Iterator[FeatureVector]:
        """Iterate rows as FeatureVectors."""
        for values, label in zip(self.features, self.labels, strict=True):
            yield FeatureVector(values=values.copy(), label=int(label))

    def __eq__(self, other: object) -> bool:
        """Exact equality of matrix, labels and layout."""
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.layout == other.layout
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.features, other.features)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def rows(self) -> list[FeatureVector]:
        """Rows as FeatureVectors."""
        return list(self)

    @property
    def class_counts(self) -> dict[int, int]:
        """Rows per label."""
        return {label: int((self.labels == label).sum()) for label in LABELS}

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Rows at ``indices``, in that order."""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[indices], labels=self.labels[indices], layout=self.layout
        )

    def with_features(self, features: np.ndarray) -> "Dataset":
        """Same labels and layout over a transformed matrix."""
        return Dataset(features=features, labels=self.labels, layout=self.layout)


class ScalerParams(BaseModel):
    """Per-feature scaling parameters fit on a training matrix."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["minmax", "standard"] = "minmax"
    minimum: list[float] = Field(default_factory=list)
    maximum: list[float] = Field(default_factory=list)
    mean: list[float] = Field(default_factory=list)
    std: list[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_bounds(self) -> "ScalerParams":
        """max >= min elementwise, aligned lengths."""
        if len(self.minimum) != len(self.maximum):
            msg = "minimum and maximum must have the same length"
            raise ValueError(msg)
        if any(hi < lo for lo, hi in zip(self.minimum, self.maximum, strict=True)):
            msg = "maximum must be >= minimum for every feature"
            raise ValueError(msg)
        return self

    @property
    def dim(self) -> int:
        """Number of features covered."""
        return len(self.minimum)
