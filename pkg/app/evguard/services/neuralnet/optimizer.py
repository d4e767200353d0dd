"""Adam with bias correction."""

from dataclasses import dataclass, field

import numpy as np

from app.evguard.schemas.neuralnet import AdamConfig, ModelParams


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators per tensor, plus the step count."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        """Zero accumulators shaped like ``params``."""
        return cls(
            m={name: np.zeros_like(t) for name, t in params},
            v={name: np.zeros_like(t) for name, t in params},
            t=0,
        )


def adam_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    t: int,
    cfg: AdamConfig | None = None,
) -> tuple[ModelParams, AdamState]:
    """One Adam update.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;
    w <- w - alpha * m_hat / (sqrt(v_hat) + eps)

    Args:
        params: Current parameters (left untouched)
        grads: Gradient per tensor name
        state: Moment accumulators
        t: 1-based step index used for bias correction
        cfg: Hyperparameters

    Returns:
        (updated params, updated state)

    """
    if t < 1:
        msg = f"Adam step index must be >= 1, got {t}"
        raise ValueError(msg)
    cfg = cfg or AdamConfig()
    correction1 = 1.0 - cfg.beta1**t
    correction2 = 1.0 - cfg.beta2**t
    tensors, m_new, v_new = {}, {}, {}
    for name, weight in params:
        g = grads[name]
        m = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * g * g
        tensors[name] = weight - cfg.alpha * (m / correction1) / (
            np.sqrt(v / correction2) + cfg.epsilon
        )
        m_new[name] = m
        v_new[name] = v
    return params.replace(tensors), AdamState(m=m_new, v=v_new, t=t)
