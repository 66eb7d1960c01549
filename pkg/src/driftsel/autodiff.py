"""Minimal reverse-mode automatic differentiation over numpy arrays.

Just enough machinery for a small 1-D convolutional classifier: elementwise
arithmetic with broadcasting, matrix products, reductions, rectifier, a
same-padded 1-D convolution, and a fused softmax cross-entropy loss.  Every
operation records a backward closure; ``Tensor.backward()`` walks the graph
in reverse topological order.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce ``grad`` back to ``shape`` by summing broadcast dimensions."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=float)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def _make(self, data, parents, backward) -> "Tensor":
        out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        return out

    @staticmethod
    def _accum(t: "Tensor", grad: np.ndarray) -> None:
        if t.requires_grad:
            t.grad = grad if t.grad is None else t.grad + grad

    @staticmethod
    def _as_tensor(value) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        other = self._as_tensor(other)

        def backward(g):
            self._accum(self, _unbroadcast(g, self.data.shape))
            self._accum(other, _unbroadcast(g, other.data.shape))

        return self._make(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            self._accum(self, -g)

        return self._make(-self.data, (self,), backward)

    def __sub__(self, other):
        other = self._as_tensor(other)

        def backward(g):
            self._accum(self, _unbroadcast(g, self.data.shape))
            self._accum(other, _unbroadcast(-g, other.data.shape))

        return self._make(self.data - other.data, (self, other), backward)

    def __rsub__(self, other):
        return self._as_tensor(other) - self

    def __mul__(self, other):
        other = self._as_tensor(other)

        def backward(g):
            self._accum(self, _unbroadcast(g * other.data, self.data.shape))
            self._accum(other, _unbroadcast(g * self.data, other.data.shape))

        return self._make(self.data * other.data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._as_tensor(other)

        def backward(g):
            self._accum(self, _unbroadcast(g / other.data, self.data.shape))
            self._accum(
                other,
                _unbroadcast(-g * self.data / (other.data * other.data), other.data.shape),
            )

        return self._make(self.data / other.data, (self, other), backward)

    def __pow__(self, exponent: float):
        if not np.isscalar(exponent):
            raise TypeError("only scalar exponents are supported")

        def backward(g):
            self._accum(self, g * exponent * self.data ** (exponent - 1))

        return self._make(self.data**exponent, (self,), backward)

    def sqrt(self):
        out_data = np.sqrt(self.data)

        def backward(g):
            self._accum(self, g * 0.5 / out_data)

        return self._make(out_data, (self,), backward)

    def relu(self):
        mask = self.data > 0

        def backward(g):
            self._accum(self, g * mask)

        return self._make(self.data * mask, (self,), backward)

    # -- reductions and products -----------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        def backward(g):
            g_full = g
            if not keepdims and axis is not None:
                g_full = np.expand_dims(g_full, axis)
            self._accum(self, np.broadcast_to(g_full, self.data.shape).copy())

        return self._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = int(np.prod([self.data.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def matmul(self, other: "Tensor"):
        other = self._as_tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError("matmul supports 2-D operands only")

        def backward(g):
            self._accum(self, g @ other.data.T)
            self._accum(other, self.data.T @ g)

        return self._make(self.data @ other.data, (self, other), backward)

    __matmul__ = matmul

    # -- graph traversal ---------------------------------------------------

    def backward(self, grad=None) -> None:
        """Accumulate gradients of ``self`` into every reachable parent."""
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=float)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def conv1d_same(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Same-padded 1-D convolution.

    ``x`` has shape (batch, in_channels, length), ``weight``
    (out_channels, in_channels, kernel), ``bias`` (out_channels,); the output
    is (batch, out_channels, length).  Implemented with an im2col matrix
    product so the heavy lifting is a single GEMM per call.
    """
    b, c_in, length = x.data.shape
    c_out, c_in_w, kernel = weight.data.shape
    if c_in_w != c_in:
        raise ValueError(f"weight expects {c_in_w} input channels, got {c_in}")
    pad_left = (kernel - 1) // 2
    pad_right = kernel // 2

    xp = np.pad(x.data, ((0, 0), (0, 0), (pad_left, pad_right)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, kernel, axis=2)
    cols = windows.transpose(0, 2, 1, 3).reshape(b * length, c_in * kernel)
    w_mat = weight.data.reshape(c_out, c_in * kernel).T
    y = (cols @ w_mat + bias.data).reshape(b, length, c_out).transpose(0, 2, 1)

    def backward(g):
        g_mat = g.transpose(0, 2, 1).reshape(b * length, c_out)
        Tensor._accum(bias, g.sum(axis=(0, 2)))
        Tensor._accum(weight, (cols.T @ g_mat).T.reshape(c_out, c_in, kernel))
        if x.requires_grad:
            d_cols = (g_mat @ w_mat.T).reshape(b, length, c_in, kernel)
            d_xp = np.zeros_like(xp)
            for k in range(kernel):
                d_xp[:, :, k : k + length] += d_cols[:, :, :, k].transpose(0, 2, 1)
            Tensor._accum(x, d_xp[:, :, pad_left : pad_left + length])

    out = Tensor(y, requires_grad=x.requires_grad or weight.requires_grad or bias.requires_grad)
    if out.requires_grad:
        out._parents = (x, weight, bias)
        out._backward = backward
    return out


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of integer ``labels`` under softmax of ``logits`` (batch, classes)."""
    labels = np.asarray(labels)
    n = logits.data.shape[0]
    logp = log_softmax(logits.data)
    loss = -logp[np.arange(n), labels].mean()

    def backward(g):
        probs = np.exp(logp)
        probs[np.arange(n), labels] -= 1.0
        Tensor._accum(logits, g * probs / n)

    out = Tensor(loss, requires_grad=logits.requires_grad)
    if out.requires_grad:
        out._parents = (logits,)
        out._backward = backward
    return out
