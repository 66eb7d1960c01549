"""A small fully-convolutional network for binary time-series classification.

Three same-padded 1-D convolution blocks (kernel sizes 7/5/3, channel widths
32/64/32), each followed by batch normalization and a rectifier, then global
average pooling and a dense softmax head.  Built on the in-package autodiff
core; all state lives in plain numpy arrays so models serialize without
pickling.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, conv1d_same
from .wright_fisher import substream

DEFAULT_CHANNELS = (32, 64, 32)
DEFAULT_KERNELS = (7, 5, 3)

_STREAM_INIT = 11


class Conv1d:
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator):
        scale = np.sqrt(2.0 / (in_channels * kernel_size))
        self.weight = Tensor(
            rng.normal(0.0, scale, size=(out_channels, in_channels, kernel_size)),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return conv1d_same(x, self.weight, self.bias)

    def parameters(self):
        return [self.weight, self.bias]


class BatchNorm1d:
    """Per-channel batch normalization over (batch, length).

    Training mode normalizes with batch statistics and updates running
    estimates; evaluation mode uses the running estimates, so inference is
    deterministic and batch-size independent.
    """

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = Tensor(np.ones((1, channels, 1)), requires_grad=True)
        self.beta = Tensor(np.zeros((1, channels, 1)), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        if training:
            mu = x.mean(axis=(0, 2), keepdims=True)
            var = ((x - mu) ** 2).mean(axis=(0, 2), keepdims=True)
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mu.data.reshape(-1)
            self.running_var = (1 - m) * self.running_var + m * var.data.reshape(-1)
            x_hat = (x - mu) / (var + self.eps).sqrt()
        else:
            mu = self.running_mean.reshape(1, -1, 1)
            sd = np.sqrt(self.running_var + self.eps).reshape(1, -1, 1)
            x_hat = (x - Tensor(mu)) / Tensor(sd)
        return self.gamma * x_hat + self.beta

    def parameters(self):
        return [self.gamma, self.beta]


class Dense:
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        scale = np.sqrt(1.0 / in_features)
        self.weight = Tensor(rng.normal(0.0, scale, size=(in_features, out_features)),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias

    def parameters(self):
        return [self.weight, self.bias]


class FcnNetwork:
    """The convolution-BN-ReLU stack with a softmax head.

    Accepts input of any length; weights are initialized deterministically
    from ``seed``.
    """

    def __init__(
        self,
        in_channels: int = 1,
        n_classes: int = 2,
        channels: tuple[int, ...] = DEFAULT_CHANNELS,
        kernels: tuple[int, ...] = DEFAULT_KERNELS,
        seed: int = 0,
    ):
        if len(channels) != len(kernels):
            raise ValueError("channels and kernels must have the same length")
        rng = substream(seed, _STREAM_INIT)
        self.channels = tuple(channels)
        self.kernels = tuple(kernels)
        self.convs: list[Conv1d] = []
        self.norms: list[BatchNorm1d] = []
        prev = in_channels
        for width, kernel in zip(channels, kernels):
            self.convs.append(Conv1d(prev, width, kernel, rng))
            self.norms.append(BatchNorm1d(width))
            prev = width
        self.head = Dense(prev, n_classes, rng)

    def forward(self, x: np.ndarray, training: bool = False) -> Tensor:
        """Logits for ``x`` of shape (batch, length) or (batch, channels, length)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            x = x[:, None, :]
        t = Tensor(x)
        for conv, norm in zip(self.convs, self.norms):
            t = norm(conv(t), training).relu()
        t = t.mean(axis=2)  # global average pooling
        return self.head(t)

    def parameters(self) -> list[Tensor]:
        params: list[Tensor] = []
        for conv, norm in zip(self.convs, self.norms):
            params.extend(conv.parameters())
            params.extend(norm.parameters())
        params.extend(self.head.parameters())
        return params

    def state_dict(self) -> dict[str, np.ndarray]:
        state: dict[str, np.ndarray] = {}
        for i, (conv, norm) in enumerate(zip(self.convs, self.norms)):
            state[f"conv{i}.weight"] = conv.weight.data
            state[f"conv{i}.bias"] = conv.bias.data
            state[f"norm{i}.gamma"] = norm.gamma.data
            state[f"norm{i}.beta"] = norm.beta.data
            state[f"norm{i}.running_mean"] = norm.running_mean
            state[f"norm{i}.running_var"] = norm.running_var
        state["head.weight"] = self.head.weight.data
        state["head.bias"] = self.head.bias.data
        return {name: arr.copy() for name, arr in state.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for i, (conv, norm) in enumerate(zip(self.convs, self.norms)):
            conv.weight.data = state[f"conv{i}.weight"].copy()
            conv.bias.data = state[f"conv{i}.bias"].copy()
            norm.gamma.data = state[f"norm{i}.gamma"].copy()
            norm.beta.data = state[f"norm{i}.beta"].copy()
            norm.running_mean = state[f"norm{i}.running_mean"].copy()
            norm.running_var = state[f"norm{i}.running_var"].copy()
        self.head.weight.data = state["head.weight"].copy()
        self.head.bias.data = state["head.bias"].copy()


class Adam:
    """Adam update rule for a fixed parameter list."""

    def __init__(self, params: list[Tensor], learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in params]
        self._v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.step_count
        bias2 = 1.0 - b2**self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            m *= b1
            m += (1.0 - b1) * p.grad
            v *= b2
            v += (1.0 - b2) * p.grad**2
            p.data -= self.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
