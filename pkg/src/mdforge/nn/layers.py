"""Layer specs and their numpy forward/backward kernels (NCHW layout)."""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_output_size(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


# -- specs -----------------------------------------------------------------------


@dataclass(frozen=True)
class Conv:
    filters: int
    kernel: int = 3
    stride: int = 1
    padding: int = 0

    def describe(self):
        return f"conv {self.filters} {self.kernel} {self.stride} {self.padding}"


@dataclass(frozen=True)
class BatchNorm:
    momentum: float = 0.9
    eps: float = 1e-5

    def describe(self):
        return f"batchnorm {self.momentum!r} {self.eps!r}"


@dataclass(frozen=True)
class ReLU:
    def describe(self):
        return "relu"


@dataclass(frozen=True)
class MaxPool:
    window: int = 2
    stride: int = 2

    def describe(self):
        return f"maxpool {self.window} {self.stride}"


@dataclass(frozen=True)
class Dropout:
    rate: float = 0.5

    def __post_init__(self):
        if not 0 <= self.rate < 1:
            raise ValueError("dropout rate must lie in [0, 1)")

    def describe(self):
        return f"dropout {self.rate!r}"


@dataclass(frozen=True)
class Flatten:
    def describe(self):
        return "flatten"


@dataclass(frozen=True)
class Dense:
    units: int

    def describe(self):
        return f"dense {self.units}"


@dataclass(frozen=True)
class Softmax:
    def describe(self):
        return "softmax"


def parse_layer(line):
    parts = line.split()
    if not parts:
        raise ValueError("empty layer line")
    kind, args = parts[0], parts[1:]
    try:
        if kind == "conv":
            return Conv(*(int(a) for a in args))
        if kind == "batchnorm":
            return BatchNorm(*(float(a) for a in args))
        if kind == "relu":
            return ReLU()
        if kind == "maxpool":
            return MaxPool(*(int(a) for a in args))
        if kind == "dropout":
            return Dropout(float(args[0]))
        if kind == "flatten":
            return Flatten()
        if kind == "dense":
            return Dense(int(args[0]))
        if kind == "softmax":
            return Softmax()
    except (TypeError, IndexError, ValueError) as exc:
        raise ValueError(f"bad layer line {line!r}: {exc}") from None
    raise ValueError(f"unknown layer kind {kind!r}")


# -- kernels ---------------------------------------------------------------------


def _windows(x, k, s):
    # (N, C, H, W) -> (N, C, Ho, Wo, k, k) view
    return sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::s, ::s]


def conv_forward(x, w, b, stride, padding):
    n = x.shape[0]
    f, c, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    win = _windows(xp, k, stride)
    ho, wo = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    out = cols @ w.reshape(f, -1).T + b
    out = out.reshape(n, ho, wo, f).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), (xp.shape, cols, ho, wo)


def conv_backward(dout, w, cache, stride, padding):
    xp_shape, cols, ho, wo = cache
    n = dout.shape[0]
    f, c, k, _ = w.shape
    dflat = dout.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
    dw = (dflat.T @ cols).reshape(w.shape)
    db = dflat.sum(axis=0)
    dcols = (dflat @ w.reshape(f, -1)).reshape(n, ho, wo, c, k, k)
    dxp = np.zeros(xp_shape, dtype=dout.dtype)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[
                :, :, :, :, i, j
            ].transpose(0, 3, 1, 2)
    if padding:
        dxp = dxp[:, :, padding:-padding, padding:-padding]
    return dxp, dw, db


def maxpool_forward(x, window, stride):
    win = _windows(x, window, stride)
    flat = win.reshape(*win.shape[:4], window * window)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg)


def maxpool_backward(dout, cache, window, stride):
    x_shape, arg = cache
    ho, wo = dout.shape[2], dout.shape[3]
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for i in range(window):
        for j in range(window):
            mask = arg == i * window + j
            dx[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += dout * mask
    return dx


def batchnorm_forward(x, gamma, beta, running_mean, running_var, layer, training):
    """Per-channel normalization; for 4-D input the channel axis is 1."""
    axes = (0, 2, 3) if x.ndim == 4 else (0,)
    shape = (1, -1, 1, 1) if x.ndim == 4 else (1, -1)
    if training:
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean *= layer.momentum
        running_mean += (1 - layer.momentum) * mean
        running_var *= layer.momentum
        running_var += (1 - layer.momentum) * var
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + layer.eps)
    xhat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
    out = gamma.reshape(shape) * xhat + beta.reshape(shape)
    return out, (xhat, inv_std, axes, shape)


def batchnorm_backward(dout, gamma, cache):
    xhat, inv_std, axes, shape = cache
    m = dout.size // dout.shape[1]
    dgamma = (dout * xhat).sum(axis=axes)
    dbeta = dout.sum(axis=axes)
    dxhat = dout * gamma.reshape(shape)
    dx = (
        inv_std.reshape(shape)
        / m
        * (
            m * dxhat
            - dxhat.sum(axis=axes).reshape(shape)
            - xhat * (dxhat * xhat).sum(axis=axes).reshape(shape)
        )
    )
    return dx, dgamma, dbeta


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
