"""Schemas for classifier evaluation: confusion counts, metric sets and CV reports.

Ransomware (label 0) is the positive class throughout.
"""

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.evguard.schemas.neuralnet import TrainHistory

METRIC_NAMES = ("acc", "precision", "recall", "f1", "far", "auc")


class Confusion(BaseModel):
    """Counts with ransomware as the positive class."""

    model_config = ConfigDict(frozen=True)

    tp: int = Field(ge=0)
    fp: int = Field(ge=0)
    tn: int = Field(ge=0)
    fn: int = Field(ge=0)

    @model_validator(mode="after")
    def check_total(self) -> "Confusion":
        """At least one sample."""
        if self.n == 0:
            msg = "confusion must count at least one sample"
            raise ValueError(msg)
        return self

    @property
    def n(self) -> int:
        """Total samples."""
        return self.tp + self.fp + self.tn + self.fn


class MetricSet(BaseModel):
    """Threshold metrics of one confusion; ``degenerate`` names every 0/0 set to 0."""

    model_config = ConfigDict(frozen=True)

    acc: float = Field(ge=0.0, le=1.0)
    precision: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f1: float = Field(ge=0.0, le=1.0)
    far: float = Field(ge=0.0, le=1.0)
    degenerate: tuple[str, ...] = ()


class FoldReport(BaseModel):
    """Held-out metrics of one cross-validation fold."""

    fold_index: int = Field(ge=0)
    confusion: Confusion
    acc: float
    precision: float
    recall: float
    f1: float
    far: float
    auc: float
    train_time: float = Field(ge=0.0, description="seconds")
    n_train: int
    n_test: int
    degenerate: tuple[str, ...] = ()

    def metric(self, name: str) -> float:
        """Metric value by name."""
        return float(getattr(self, name))


class MetricSummary(BaseModel):
    """Mean and population standard deviation of a metric over folds."""

    model_config = ConfigDict(frozen=True)

    mean: float
    std: float
    min: float
    max: float


class CvReport(BaseModel):
    """k-fold cross-validation of one architecture."""

    model: str
    k: int = Field(ge=2)
    seed: int
    folds: list[FoldReport]
    summary: dict[str, MetricSummary]
    train_time: MetricSummary

    @model_validator(mode="after")
    def check_folds(self) -> "CvReport":
        """One report per fold, in fold order."""
        if [f.fold_index for f in self.folds] != list(range(self.k)):
            msg = f"expected fold reports 0..{self.k - 1} in order"
            raise ValueError(msg)
        return self


class SplitReport(BaseModel):
    """Single 40/30/30 experiment: training history and test-set metrics."""

    model: str
    seed: int
    sizes: dict[str, int]
    confusion: Confusion
    metrics: MetricSet
    auc: float
    history: TrainHistory
