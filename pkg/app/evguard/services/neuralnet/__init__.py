"""From-scratch numpy engine for the DNN, 1-D CNN and LSTM detectors."""

from app.evguard.services.neuralnet.gradcheck import gradient_check
from app.evguard.services.neuralnet.network import (
    backward,
    build,
    forward,
    loss,
    network_for,
    run_forward,
)
from app.evguard.services.neuralnet.optimizer import AdamState, adam_step
from app.evguard.services.neuralnet.serialization import load_model, save_model
from app.evguard.services.neuralnet.trainer import (
    build_train_config,
    predict,
    train,
    write_history_csv,
)

__all__ = [
    "AdamState",
    "adam_step",
    "backward",
    "build",
    "build_train_config",
    "forward",
    "gradient_check",
    "load_model",
    "loss",
    "network_for",
    "predict",
    "run_forward",
    "save_model",
    "train",
    "write_history_csv",
]
