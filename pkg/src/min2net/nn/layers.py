"""The layer primitives MIN2Net is built from.

All time-series layers use the channels-last layout (B, 1, T, C): batch,
dummy height, time samples, feature channels.  Convolutions run along the
time axis only.  Every layer caches what its backward pass needs on the
instance, so a single instance must not interleave forward calls from two
logical threads.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .params import Param, glorot_uniform


def _check_4d(x, n_channels=None, what="input"):
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[1] != 1:
        raise ShapeError(f"{what} must have shape (B, 1, T, C), got {x.shape}")
    if n_channels is not None and x.shape[3] != n_channels:
        raise ShapeError(
            f"{what} has {x.shape[3]} channels, layer declares {n_channels}"
        )
    return x


def same_padding(kernel: int) -> tuple[int, int]:
    """Left/right zero padding so a stride-1 conv preserves length.

    Even kernels pad one sample less on the left (channels-last convention).
    """
    left = (kernel - 1) // 2
    return left, kernel - 1 - left


class Layer:
    """Base class: parameter bookkeeping plus forward/backward contract."""

    def __init__(self):
        self.params: list[Param] = []

    def forward(self, x, train: bool = True):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def astype(self, dtype):
        for p in self.params:
            p.astype(dtype)
        return self


class ConvTime(Layer):
    """Time-axis convolution, kernel (1, K, Cin, Cout), same padding.

    Stride s subsamples the stride-1 output at indices 0, s, 2s, ...; the
    matching transposed layer is the exact adjoint of this map.
    """

    def __init__(self, in_ch, out_ch, kernel, stride=1, *, name="conv",
                 rng=None, dtype=np.float32):
        super().__init__()
        if kernel < 1:
            raise ShapeError("kernel size must be >= 1")
        if stride < 1:
            raise ShapeError("stride must be >= 1")
        self.in_ch, self.out_ch, self.kernel, self.stride = in_ch, out_ch, kernel, stride
        rng = rng if rng is not None else np.random.default_rng(0)
        w = glorot_uniform(rng, (kernel, in_ch, out_ch),
                           kernel * in_ch, kernel * out_ch, dtype)
        self.w = Param(f"{name}.w", w)
        self.b = Param(f"{name}.b", np.zeros(out_ch, dtype=dtype))
        self.params = [self.w, self.b]
        self._cache = None

    def forward(self, x, train=True):
        x = _check_4d(x, self.in_ch)
        B, _, T, C = x.shape
        if self.stride > 1 and T % self.stride != 0:
            raise ShapeError(f"stride {self.stride} does not divide length {T}")
        K, s = self.kernel, self.stride
        pad_l, pad_r = same_padding(K)
        xp = np.pad(x[:, 0], ((0, 0), (pad_l, pad_r), (0, 0)))
        win = sliding_window_view(xp, K, axis=1)[:, ::s]        # (B, L, C, K)
        y = np.einsum("blck,kco->blo", win, self.w.value, optimize=True)
        y += self.b.value
        self._cache = (xp, x.shape)
        return y[:, None]

    def backward(self, grad_out):
        xp, x_shape = self._cache
        go = _check_4d(grad_out, self.out_ch, "grad")[:, 0]
        B, _, T, C = x_shape
        K, s = self.kernel, self.stride
        pad_l, _ = same_padding(K)
        L = go.shape[1]
        win = sliding_window_view(xp, K, axis=1)[:, ::s]
        self.w.grad += np.einsum("blck,blo->kco", win, go, optimize=True)
        self.b.grad += go.sum(axis=(0, 1))
        dxp = np.zeros_like(xp)
        wv = self.w.value
        for k in range(K):
            dxp[:, k : k + (L - 1) * s + 1 : s] += go @ wv[k].T
        return dxp[:, pad_l : pad_l + T][:, None]


class ConvTransposeTime(Layer):
    """Adjoint of the strided ConvTime map; kernel (1, K, Cout, Cin).

    Output length is exactly L * stride (same-padding semantics).
    """

    def __init__(self, in_ch, out_ch, kernel, stride, *, name="deconv",
                 rng=None, dtype=np.float32):
        super().__init__()
        if stride < 1:
            raise ShapeError("stride must be >= 1")
        if kernel < stride:
            raise ShapeError(f"kernel {kernel} must be >= stride {stride}")
        self.in_ch, self.out_ch, self.kernel, self.stride = in_ch, out_ch, kernel, stride
        rng = rng if rng is not None else np.random.default_rng(0)
        w = glorot_uniform(rng, (kernel, out_ch, in_ch),
                           kernel * in_ch, kernel * out_ch, dtype)
        self.w = Param(f"{name}.w", w)
        self.b = Param(f"{name}.b", np.zeros(out_ch, dtype=dtype))
        self.params = [self.w, self.b]
        self._cache = None

    def _index_map(self, L):
        # target time index for (source l, tap k) under the adjoint scatter
        K, s = self.kernel, self.stride
        pad_l, _ = same_padding(K)
        l = np.arange(L)
        return [(k, l * s + k - pad_l) for k in range(K)]

    def forward(self, x, train=True):
        x = _check_4d(x, self.in_ch)
        v = x[:, 0]
        B, L, _ = v.shape
        Ts = L * self.stride
        out = np.zeros((B, Ts, self.out_ch), dtype=v.dtype)
        wv = self.w.value
        for k, t in self._index_map(L):
            m = (t >= 0) & (t < Ts)
            out[:, t[m]] += v[:, m] @ wv[k].T
        out += self.b.value
        self._cache = (v, Ts)
        return out[:, None]

    def backward(self, grad_out):
        v, Ts = self._cache
        go = _check_4d(grad_out, self.out_ch, "grad")[:, 0]
        L = v.shape[1]
        dv = np.zeros_like(v)
        wv = self.w.value
        for k, t in self._index_map(L):
            m = (t >= 0) & (t < Ts)
            g = go[:, t[m]]
            dv[:, m] += g @ wv[k]
            self.w.grad[k] += np.einsum("blo,bli->oi", g, v[:, m], optimize=True)
        self.b.grad += go.sum(axis=(0, 1))
        return dv[:, None]


class BatchNorm(Layer):
    """Per-channel batch normalization over the (B, 1, T) axes."""

    def __init__(self, n_ch, *, eps=1e-3, momentum=0.99, name="bn", dtype=np.float32):
        super().__init__()
        self.n_ch = n_ch
        self.eps = eps
        self.momentum = momentum
        self.gamma = Param(f"{name}.gamma", np.ones(n_ch, dtype=dtype))
        self.beta = Param(f"{name}.beta", np.zeros(n_ch, dtype=dtype))
        self.params = [self.gamma, self.beta]
        self.running_mean = np.zeros(n_ch, dtype=dtype)
        self.running_var = np.ones(n_ch, dtype=dtype)
        self._cache = None

    def astype(self, dtype):
        super().astype(dtype)
        self.running_mean = self.running_mean.astype(dtype)
        self.running_var = self.running_var.astype(dtype)
        return self

    def forward(self, x, train=True):
        x = _check_4d(x, self.n_ch)
        if train:
            if x.shape[0] < 2:
                raise ShapeError("batch norm in train mode needs batch size >= 2")
            mu = x.mean(axis=(0, 1, 2))
            var = x.var(axis=(0, 1, 2))
            m = self.momentum
            self.running_mean = (m * self.running_mean + (1 - m) * mu).astype(
                self.running_mean.dtype)
            self.running_var = (m * self.running_var + (1 - m) * var).astype(
                self.running_var.dtype)
        else:
            mu, var = self.running_mean, self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv
        self._cache = (xhat, inv, train, x.shape)
        return self.gamma.value * xhat + self.beta.value

    def backward(self, grad_out):
        xhat, inv, train, x_shape = self._cache
        go = _check_4d(grad_out, self.n_ch, "grad")
        self.gamma.grad += (go * xhat).sum(axis=(0, 1, 2))
        self.beta.grad += go.sum(axis=(0, 1, 2))
        dxhat = go * self.gamma.value
        if not train:
            return dxhat * inv
        n = x_shape[0] * x_shape[1] * x_shape[2]
        # standard train-mode BN backward: batch statistics depend on x
        s1 = dxhat.sum(axis=(0, 1, 2))
        s2 = (dxhat * xhat).sum(axis=(0, 1, 2))
        return inv * (dxhat - s1 / n - xhat * s2 / n)


class AvgPoolTime(Layer):
    """Mean over non-overlapping windows of `pool` time samples."""

    def __init__(self, pool):
        super().__init__()
        if pool < 1:
            raise ShapeError("pool size must be >= 1")
        self.pool = pool
        self._cache = None

    def forward(self, x, train=True):
        x = _check_4d(x)
        B, _, T, C = x.shape
        if T % self.pool != 0:
            raise ShapeError(f"pool {self.pool} does not divide length {T}")
        y = x[:, 0].reshape(B, T // self.pool, self.pool, C).mean(axis=2)
        self._cache = x.shape
        return y[:, None]

    def backward(self, grad_out):
        B, _, T, C = self._cache
        go = _check_4d(grad_out, what="grad")[:, 0]
        g = np.repeat(go, self.pool, axis=1) / self.pool
        return g[:, None]


class Dense(Layer):
    """Affine map on (B, Din) rows."""

    def __init__(self, in_dim, out_dim, *, name="fc", rng=None, dtype=np.float32):
        super().__init__()
        self.in_dim, self.out_dim = in_dim, out_dim
        rng = rng if rng is not None else np.random.default_rng(0)
        w = glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim, dtype)
        self.w = Param(f"{name}.w", w)
        self.b = Param(f"{name}.b", np.zeros(out_dim, dtype=dtype))
        self.params = [self.w, self.b]
        self._cache = None

    def forward(self, x, train=True):
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(
                f"dense input must be (B, {self.in_dim}), got {x.shape}")
        self._cache = x
        return x @ self.w.value + self.b.value

    def backward(self, grad_out):
        x = self._cache
        go = np.asarray(grad_out)
        if go.shape != (x.shape[0], self.out_dim):
            raise ShapeError(f"grad must be (B, {self.out_dim}), got {go.shape}")
        self.w.grad += x.T @ go
        self.b.grad += go.sum(axis=0)
        return go @ self.w.value.T


class Elu(Layer):
    """x for x > 0, exp(x) - 1 otherwise (unit alpha); any shape."""

    def __init__(self):
        super().__init__()
        self._cache = None

    def forward(self, x, train=True):
        x = np.asarray(x)
        y = np.where(x > 0, x, np.expm1(x))
        self._cache = y
        return y

    def backward(self, grad_out):
        y = self._cache
        return grad_out * np.where(y > 0, 1.0, y + 1.0)


class Softmax(Layer):
    """Row-wise softmax with max subtraction for overflow safety."""

    def __init__(self):
        super().__init__()
        self._cache = None

    def forward(self, x, train=True):
        x = np.asarray(x)
        if x.ndim != 2:
            raise ShapeError(f"softmax input must be (B, N), got {x.shape}")
        e = np.exp(x - x.max(axis=1, keepdims=True))
        p = e / e.sum(axis=1, keepdims=True)
        self._cache = p
        return p

    def backward(self, grad_out):
        p = self._cache
        inner = (grad_out * p).sum(axis=1, keepdims=True)
        return p * (grad_out - inner)
