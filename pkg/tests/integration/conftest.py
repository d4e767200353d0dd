"""Pytest fixtures for integration tests."""

import numpy as np
import pytest

from app.evguard.schemas.features import Dataset
from app.evguard.schemas.neuralnet import DnnSpec, ModelParams
from app.evguard.services.features import apply_scaler, fit_scaler, synth_corpus
from app.evguard.services.neuralnet import predict, train


@pytest.fixture(scope="session")
def separable_corpus(layout) -> Dataset:
    """60 + 60 rows at separation 1, min-max scaled."""
    raw = synth_corpus(60, 60, layout, separation=1.0, seed=3)
    return apply_scaler(fit_scaler(raw, "minmax"), raw)


@pytest.fixture(scope="session")
def trained_dnn(separable_corpus) -> ModelParams:
    """Small DNN trained on ``separable_corpus``."""
    params, _ = train(DnnSpec(hidden=(16,)), separable_corpus, None, {"epochs": 60, "batch_size": 8})
    return params


@pytest.fixture(scope="session")
def ransomware_row(separable_corpus, trained_dnn) -> int:
    """Index of the row the trained DNN finds most ransomware-like."""
    scores = 1.0 - predict(trained_dnn, separable_corpus.features)
    return int(np.argmax(scores))
