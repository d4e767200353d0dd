"""Pytest configuration and fixtures."""

import logging

import numpy as np
import pytest

from app.evguard.schemas.features import Dataset, FeatureLayout
from app.evguard.schemas.neuralnet import CnnSpec, ConvSpec, DnnSpec, LstmSpec
from app.evguard.services.features import apply_scaler, fit_scaler, load_layout, synth_corpus

logger = logging.getLogger(__name__)


@pytest.fixture(scope="session")
def layout() -> FeatureLayout:
    """Packaged 140-slot layout."""
    return load_layout()


@pytest.fixture(scope="session")
def small_corpus(layout) -> Dataset:
    """Raw-count corpus, 40 ransomware + 30 normal rows, separation 0.9."""
    return synth_corpus(40, 30, layout, separation=0.9, seed=7)


@pytest.fixture(scope="session")
def scaled_corpus(small_corpus) -> Dataset:
    """``small_corpus`` min-max scaled on all of its rows."""
    return apply_scaler(fit_scaler(small_corpus, "minmax"), small_corpus)


@pytest.fixture
def tiny_specs() -> dict[str, DnnSpec | CnnSpec | LstmSpec]:
    """Narrow versions of the three architectures over the same 140 inputs."""
    return {
        "dnn": DnnSpec(hidden=(8, 8)),
        "cnn": CnnSpec(conv=(ConvSpec(filters=4), ConvSpec(filters=4)), fc=8),
        "lstm": LstmSpec(seq_len=14, features_per_step=10, units_per_layer=(4, 4)),
    }


@pytest.fixture
def grad_batch(scaled_corpus) -> tuple[np.ndarray, np.ndarray]:
    """Six scaled rows of both classes with float labels."""
    rows = np.concatenate(
        [np.flatnonzero(scaled_corpus.labels == 0)[:3], np.flatnonzero(scaled_corpus.labels == 1)[:3]]
    )
    return scaled_corpus.features[rows], scaled_corpus.labels[rows].astype(np.float64)
