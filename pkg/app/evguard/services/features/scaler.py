"""Per-feature scaling fit on a training matrix.

``minmax`` (default) maps each feature onto [0, 1] and clamps values outside
the fitted range; constant features map to 0. ``standard`` is a z-score
alternative; constant features map to 0 there as well.
"""

from typing import Literal, overload

import numpy as np

from app.evguard.core.config import settings
from app.evguard.schemas.errors import DegenerateDataError, ShapeMismatchError
from app.evguard.schemas.features import Dataset, FeatureVector, ScalerParams


def fit_scaler(
    dataset: Dataset | np.ndarray, kind: Literal["minmax", "standard"] | None = None
) -> ScalerParams:
    """Fit scaling parameters in one pass over the rows.

    Args:
        dataset: Dataset or (N, D) matrix, N >= 1
        kind: "minmax" or "standard"; defaults to the configured scaling

    Returns:
        ScalerParams

    Raises:
        DegenerateDataError: If there are no rows

    """
    matrix = dataset.features if isinstance(dataset, Dataset) else np.asarray(dataset)
    if matrix.ndim != 2 or matrix.shape[0] == 0:  # noqa: PLR2004
        msg = "Cannot fit a scaler on an empty dataset"
        raise DegenerateDataError(msg)
    kind = kind or settings.scaling
    params = {
        "kind": kind,
        "minimum": matrix.min(axis=0).tolist(),
        "maximum": matrix.max(axis=0).tolist(),
    }
    if kind == "standard":
        params["mean"] = matrix.mean(axis=0).tolist()
        params["std"] = matrix.std(axis=0).tolist()
    return ScalerParams(**params)


def _scale(params: ScalerParams, values: np.ndarray) -> np.ndarray:
    if values.shape[-1] != params.dim:
        msg = f"Scaler fit on {params.dim} features, got {values.shape[-1]}"
        raise ShapeMismatchError(msg)
    if params.kind == "standard":
        center = np.asarray(params.mean)
        spread = np.asarray(params.std)
    else:
        center = np.asarray(params.minimum)
        spread = np.asarray(params.maximum) - center
    constant = spread == 0.0
    scaled = (values - center) / np.where(constant, 1.0, spread)
    scaled = np.where(constant, 0.0, scaled)
    if params.kind == "minmax":
        scaled = np.clip(scaled, 0.0, 1.0)
    return scaled


@overload
def apply_scaler(params: ScalerParams, vector: FeatureVector) -> FeatureVector: ...
@overload
def apply_scaler(params: ScalerParams, vector: Dataset) -> Dataset: ...
@overload
def apply_scaler(params: ScalerParams, vector: np.ndarray) -> np.ndarray: ...


def apply_scaler(
    params: ScalerParams, vector: FeatureVector | Dataset | np.ndarray
) -> FeatureVector | Dataset | np.ndarray:
    """Scale a vector, a dataset or a raw (..., D) array, keeping its type."""
    if isinstance(vector, FeatureVector):
        return FeatureVector(values=_scale(params, vector.values), label=vector.label)
    if isinstance(vector, Dataset):
        return vector.with_features(_scale(params, vector.features))
    return _scale(params, np.asarray(vector, dtype=np.float64))
