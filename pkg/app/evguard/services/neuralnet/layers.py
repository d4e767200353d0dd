"""Differentiable layers of the detector networks.

Every layer caches what its backward pass needs during ``forward`` and writes
parameter gradients into ``grads`` during ``backward``. Layers never own their
tensors: ``bind`` points them at arrays held by a ModelParams, so one set of
parameters can back any number of independent layer stacks (one per thread).

Shapes: dense layers take (B, D); sequence layers take (B, T, C), channels last.
"""

from abc import ABC, abstractmethod

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from app.evguard.schemas.errors import ShapeMismatchError


def he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """U(-sqrt(6/fan_in), +sqrt(6/fan_in)), for weights feeding a ReLU."""
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def lecun_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """U(-sqrt(3/fan_in), +sqrt(3/fan_in)), for sigmoid/tanh-facing weights."""
    limit = np.sqrt(3.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Layer(ABC):
    """Base class for a layer with an explicit forward/backward pair.

    Subclasses with parameters override ``declare`` and ``initialize``.
    """

    def __init__(self, name: str):
        self.name = name
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def declare(self) -> dict[str, tuple[int, ...]]:
        """Tensor names and shapes, in declaration order."""
        return {}

    def initialize(self, rng: np.random.Generator) -> dict[str, np.ndarray]:  # noqa: ARG002
        """Fresh tensors for ``declare()``, drawn from ``rng``."""
        return {}

    def bind(self, tensors: dict[str, np.ndarray]) -> None:
        """Point the layer at externally held tensors."""
        self.params = {key: tensors[key] for key in self.declare()}

    @abstractmethod
    def forward(
        self, x: np.ndarray, *, training: bool, rng: np.random.Generator | None
    ) -> np.ndarray:
        """Compute the output and cache the backward state."""

    @abstractmethod
    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. the input; parameter gradients go to ``grads``."""

    def pattern(self) -> bytes:
        """Piecewise-linear branch taken on the last forward pass (ReLU, max-pool)."""
        return b""

    def __repr__(self) -> str:
        """Layer name and class."""
        return f"{type(self).__name__}({self.name})"


class Dense(Layer):
    """y = x @ W + b."""

    def __init__(self, name: str, n_in: int, n_out: int, *, init: str = "he"):
        super().__init__(name)
        self.n_in = n_in
        self.n_out = n_out
        self.init = init
        self._x: np.ndarray | None = None

    def declare(self) -> dict[str, tuple[int, ...]]:
        """Weight (n_in, n_out) and bias (n_out,)."""
        return {f"{self.name}.weight": (self.n_in, self.n_out), f"{self.name}.bias": (self.n_out,)}

    def initialize(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """Fan-in scaled uniform weights, zero bias."""
        draw = he_uniform if self.init == "he" else lecun_uniform
        return {
            f"{self.name}.weight": draw(rng, (self.n_in, self.n_out), self.n_in),
            f"{self.name}.bias": np.zeros(self.n_out),
        }

    def forward(
        self, x: np.ndarray, *, training: bool, rng: np.random.Generator | None
    ) -> np.ndarray:
        """Affine map."""
        if x.shape[-1] != self.n_in:
            msg = f"{self.name} expects {self.n_in} inputs, got {x.shape[-1]}"
            raise ShapeMismatchError(msg)
        self._x = x
        return x @ self.params[f"{self.name}.weight"] + self.params[f"{self.name}.bias"]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """dW = x^T g, db = sum g, dx = g W^T."""
        self.grads = {
            f"{self.name}.weight": self._x.T @ grad,
            f"{self.name}.bias": grad.sum(axis=0),
        }
        return grad @ self.params[f"{self.name}.weight"].T


class ReLU(Layer):
    """max(x, 0)."""

    def __init__(self, name: str):
        super().__init__(name)
        self._mask: np.ndarray | None = None

    def forward(
        self, x: np.ndarray, *, training: bool, rng: np.random.Generator | None
    ) -> np.ndarray:
        """Zero the negative part."""
        self._mask = x > 0.0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Pass the gradient where the input was positive."""
        return np.where(self._mask, grad, 0.0)

    def pattern(self) -> bytes:
        """Packed activation mask."""
        return np.packbits(self._mask).tobytes()


class Dropout(Layer):
    """Inverted dropout: kept units are scaled by 1/(1-rate) at train time."""

    def __init__(self, name: str, rate: float):
        super().__init__(name)
        self.rate = rate
        self._mask: np.ndarray | None = None

    def forward(
        self, x: np.ndarray, *, training: bool, rng: np.random.Generator | None
    ) -> np.ndarray:
        """Identity at inference; seeded Bernoulli mask at train time."""
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            msg = f"{self.name} needs a generator in training mode"
            raise ValueError(msg)
        self._mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Apply the same mask to the gradient."""
        return grad if self._mask is None else grad * self._mask


class Reshape(Layer):
    """Reshape everything after the batch axis."""

    def __init__(self, name: str, shape: tuple[int, ...]):
        super().__init__(name)
        self.shape = shape
        self._in_shape: tuple[int, ...] | None = None

    def forward(
        self, x: np.ndarray, *, training: bool, rng: np.random.Generator | None
    ) -> np.ndarray:
        """(B, ...) -> (B, *shape)."""
        self._in_shape = x.shape
        return x.reshape(x.shape[0], *self.shape)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Undo the reshape."""
        return grad.reshape(self._in_shape)


class Conv1D(Layer):
    """Valid, stride-1 convolution over (B, T, C_in) -> (B, T-K+1, F).

    Weight layout is (C_in, K, F).
    """

    def __init__(self, name: str, channels_in: int, filters: int, kernel: int):
        super().__init__(name)
        self.channels_in = channels_in
        self.filters = filters
        self.kernel = kernel
        self._cols: np.ndarray | None = None
        self._in_shape: tuple[int, ...] | None = None

    def declare(self) -> dict[str, tuple[int, ...]]:
        """Weight (C_in, K, F) and bias (F,)."""
        return {
            f"{self.name}.weight": (self.channels_in, self.kernel, self.filters),
            f"{self.name}.bias": (self.filters,),
        }

    def initialize(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """He-uniform over a fan-in of C_in*K, zero bias."""
        return {
            f"{self.name}.weight": he_uniform(
                rng, (self.channels_in, self.kernel, self.filters), self.channels_in * self.kernel
            ),
            f"{self.name}.bias": np.zeros(self.filters),
        }

    def forward(
        self, x: np.ndarray, *, training: bool, rng: np.random.Generator | None
    ) -> np.ndarray:
        """Correlate every window with every filter."""
        batch, length, channels = x.shape
        if channels != self.channels_in or length < self.kernel:
            msg = (
                f"{self.name} expects (B, T>={self.kernel}, {self.channels_in}), "
                f"got {x.shape}"
            )
            raise ShapeMismatchError(msg)
        out_len = length - self.kernel + 1
        # (B, T_out, C, K) -> (B*T_out, C*K), matching the (C, K, F) weight layout
        windows = sliding_window_view(x, self.kernel, axis=1)
        self._cols = windows.reshape(batch * out_len, channels * self.kernel)
        self._in_shape = x.shape
        weight = self.params[f"{self.name}.weight"].reshape(-1, self.filters)
        out = self._cols @ weight + self.params[f"{self.name}.bias"]
        return out.reshape(batch, out_len, self.filters)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Scatter window gradients back onto the input positions."""
        batch, length, channels = self._in_shape
        out_len = length - self.kernel + 1
        grad_2d = grad.reshape(batch * out_len, self.filters)
        weight = self.params[f"{self.name}.weight"]
        self.grads = {
            f"{self.name}.weight": (self._cols.T @ grad_2d).reshape(weight.shape),
            f"{self.name}.bias": grad_2d.sum(axis=0),
        }
        cols_grad = (grad_2d @ weight.reshape(-1, self.filters).T).reshape(
            batch, out_len, channels, self.kernel
        )
        dx = np.zeros(self._in_shape)
        for k in range(self.kernel):
            dx[:, k : k + out_len, :] += cols_grad[..., k]
        return dx


class MaxPool1D(Layer):
    """Non-overlapping max pooling along time; a ragged tail is dropped."""

    def __init__(self, name: str, width: int):
        super().__init__(name)
        self.width = width
        self._argmax: np.ndarray | None = None
        self._in_shape: tuple[int, ...] | None = None

    def forward(
        self, x: np.ndarray, *, training: bool, rng: np.random.Generator | None
    ) -> np.ndarray:
        """(B, T, C) -> (B, T // width, C)."""
        batch, length, channels = x.shape
        out_len = length // self.width
        blocks = x[:, : out_len * self.width, :].reshape(batch, out_len, self.width, channels)
        self._argmax = blocks.argmax(axis=2)
        self._in_shape = x.shape
        return np.take_along_axis(blocks, self._argmax[:, :, None, :], axis=2)[:, :, 0, :]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Route each gradient to the position that won the max."""
        batch, length, channels = self._in_shape
        out_len = length // self.width
        blocks = np.zeros((batch, out_len, self.width, channels))
        np.put_along_axis(blocks, self._argmax[:, :, None, :], grad[:, :, None, :], axis=2)
        dx = np.zeros(self._in_shape)
        dx[:, : out_len * self.width, :] = blocks.reshape(batch, out_len * self.width, channels)
        return dx

    def pattern(self) -> bytes:
        """Winning positions."""
        return self._argmax.astype(np.int8).tobytes()


class LSTM(Layer):
    """Single LSTM layer over (B, T, C) returning all hidden states (B, T, H).

    Gates are packed as [input, forget, cell, output] along the last axis of
    ``W`` (C, 4H), ``U`` (H, 4H) and ``bias`` (4H,).
    """

    def __init__(self, name: str, n_in: int, units: int):
        super().__init__(name)
        self.n_in = n_in
        self.units = units
        self._cache: dict[str, np.ndarray] = {}

    def declare(self) -> dict[str, tuple[int, ...]]:
        """Input weights, recurrent weights and bias for the four gates."""
        h4 = 4 * self.units
        return {
            f"{self.name}.W": (self.n_in, h4),
            f"{self.name}.U": (self.units, h4),
            f"{self.name}.bias": (h4,),
        }

    def initialize(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """LeCun-uniform weights; zero bias except forget gate = 1."""
        h = self.units
        bias = np.zeros(4 * h)
        bias[h : 2 * h] = 1.0
        return {
            f"{self.name}.W": lecun_uniform(rng, (self.n_in, 4 * h), self.n_in),
            f"{self.name}.U": lecun_uniform(rng, (h, 4 * h), h),
            f"{self.name}.bias": bias,
        }

    def forward(
        self, x: np.ndarray, *, training: bool, rng: np.random.Generator | None
    ) -> np.ndarray:
        """Unroll over all time steps from zero initial state."""
        batch, steps, channels = x.shape
        if channels != self.n_in:
            msg = f"{self.name} expects {self.n_in} features per step, got {channels}"
            raise ShapeMismatchError(msg)
        h = self.units
        w = self.params[f"{self.name}.W"]
        u = self.params[f"{self.name}.U"]
        b = self.params[f"{self.name}.bias"]

        # Input projections for every step at once
        x_proj = x @ w + b
        gates = np.empty((steps, batch, 4 * h))
        cells = np.empty((steps + 1, batch, h))
        hidden = np.empty((steps + 1, batch, h))
        tanh_c = np.empty((steps, batch, h))
        cells[0] = 0.0
        hidden[0] = 0.0
        for t in range(steps):
            z = x_proj[:, t, :] + hidden[t] @ u
            act = gates[t]
            act[:, : 2 * h] = expit(z[:, : 2 * h])
            act[:, 2 * h : 3 * h] = np.tanh(z[:, 2 * h : 3 * h])
            act[:, 3 * h :] = expit(z[:, 3 * h :])
            i, f, g, o = act[:, :h], act[:, h : 2 * h], act[:, 2 * h : 3 * h], act[:, 3 * h :]
            cells[t + 1] = f * cells[t] + i * g
            tanh_c[t] = np.tanh(cells[t + 1])
            hidden[t + 1] = o * tanh_c[t]

        self._cache = {"x": x, "gates": gates, "cells": cells, "hidden": hidden, "tanh_c": tanh_c}
        return hidden[1:].transpose(1, 0, 2)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Backpropagation through time over every step."""
        x = self._cache["x"]
        gates = self._cache["gates"]
        cells = self._cache["cells"]
        hidden = self._cache["hidden"]
        tanh_c = self._cache["tanh_c"]
        batch, steps, _ = x.shape
        h = self.units
        u = self.params[f"{self.name}.U"]

        grad_steps = grad.transpose(1, 0, 2)
        d_z = np.empty((steps, batch, 4 * h))
        dh_next = np.zeros((batch, h))
        dc_next = np.zeros((batch, h))
        for t in range(steps - 1, -1, -1):
            act = gates[t]
            i, f, g, o = act[:, :h], act[:, h : 2 * h], act[:, 2 * h : 3 * h], act[:, 3 * h :]
            dh = grad_steps[t] + dh_next
            dc = dc_next + dh * o * (1.0 - tanh_c[t] ** 2)
            dz = d_z[t]
            dz[:, :h] = dc * g * i * (1.0 - i)
            dz[:, h : 2 * h] = dc * cells[t] * f * (1.0 - f)
            dz[:, 2 * h : 3 * h] = dc * i * (1.0 - g**2)
            dz[:, 3 * h :] = dh * tanh_c[t] * o * (1.0 - o)
            dh_next = dz @ u.T
            dc_next = dc * f

        d_z_flat = d_z.transpose(1, 0, 2).reshape(batch * steps, 4 * h)
        self.grads = {
            f"{self.name}.W": x.reshape(batch * steps, -1).T @ d_z_flat,
            f"{self.name}.U": np.einsum("tbh,tbg->hg", hidden[:-1], d_z),
            f"{self.name}.bias": d_z_flat.sum(axis=0),
        }
        return (d_z_flat @ self.params[f"{self.name}.W"].T).reshape(x.shape)


class LastStep(Layer):
    """(B, T, H) -> (B, H): keep the final time step."""

    def __init__(self, name: str):
        super().__init__(name)
        self._in_shape: tuple[int, ...] | None = None

    def forward(
        self, x: np.ndarray, *, training: bool, rng: np.random.Generator | None
    ) -> np.ndarray:
        """Select the last step."""
        self._in_shape = x.shape
        return x[:, -1, :]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Gradient flows only into the last step."""
        dx = np.zeros(self._in_shape)
        dx[:, -1, :] = grad
        return dx
