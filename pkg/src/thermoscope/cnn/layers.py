"""Layers with explicit forward/backward passes.

Activations flowing between layers are ``(n_rx, batch, n_time, channels)``.
The module-level functions at the bottom take the conventional
``(batch, n_time, n_rx, channels)`` layout and exist for direct use and tests.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidArgumentError, StateError
from . import _kernels


class Layer:
    name = ""
    params: dict = {}

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, dout, need_dx=True):
        raise NotImplementedError

    def clear(self):
        self._cache = None

    def _take_cache(self):
        cache = getattr(self, "_cache", None)
        if cache is None:
            raise StateError(f"{self.name or type(self).__name__}: backward without a train-mode forward")
        self._cache = None
        return cache


class Conv2D(Layer):
    """Stride-1 'same' convolution, kernel ``kh x kw`` over (time, receiver)."""

    def __init__(self, kh, kw, c_in, c_out, name="conv", dtype=np.float64):
        self.kh, self.kw, self.c_in, self.c_out = kh, kw, c_in, c_out
        self.p0 = (kh - 1) // 2
        self.q0 = (kw - 1) // 2
        self.name = name
        self.params = {
            "weight": np.zeros((kh, kw, c_in, c_out), dtype),
            "bias": np.zeros(c_out, dtype),
        }
        self._cache = None

    @property
    def fan_in(self):
        return self.kh * self.kw * self.c_in

    def forward(self, x, train=False, rng=None):
        nw, nb, nh, nc = x.shape
        if nc != self.c_in:
            raise InvalidArgumentError(f"{self.name}: expected {self.c_in} channels, got {nc}")
        w = self.params["weight"]
        kc = self.kh * nc
        cols = _kernels.im2col_time(np.ascontiguousarray(x), self.kh, self.p0, self.q0, self.kw - 1 - self.q0)
        out = cols[0:nw].reshape(-1, kc) @ w[:, 0].reshape(kc, self.c_out)
        for j in range(1, self.kw):
            out += cols[j:j + nw].reshape(-1, kc) @ w[:, j].reshape(kc, self.c_out)
        out += self.params["bias"]
        if train:
            self._cache = (cols, x.shape)
        return out.reshape(nw, nb, nh, self.c_out)

    def backward(self, dout, need_dx=True):
        cols, shape = self._take_cache()
        nw, nb, nh, nc = shape
        kc = self.kh * nc
        w = self.params["weight"]
        d2 = dout.reshape(-1, self.c_out)
        dw = np.empty_like(w)
        for j in range(self.kw):
            dw[:, j] = (cols[j:j + nw].reshape(-1, kc).T @ d2).reshape(self.kh, nc, self.c_out)
        grads = {"weight": dw, "bias": d2.sum(axis=0)}
        dx = None
        if need_dx:
            dcols = np.zeros(cols.shape, dout.dtype)
            for j in range(self.kw):
                dcols[j:j + nw] += (d2 @ w[:, j].reshape(kc, self.c_out).T).reshape(nw, nb, nh, kc)
            dx = _kernels.col2im_time(dcols[self.q0:self.q0 + nw], self.kh, self.p0)
        return dx, grads


class ReLU(Layer):
    name = "relu"

    def __init__(self):
        self.params = {}
        self._cache = None

    def forward(self, x, train=False, rng=None):
        out = np.maximum(x, 0)
        if train:
            self._cache = x > 0
        return out

    def backward(self, dout, need_dx=True):
        mask = self._take_cache()
        return dout * mask, {}


class MaxPool(Layer):
    """Max over non-overlapping time windows; the receiver axis is untouched."""

    name = "maxpool"

    def __init__(self, window):
        self.window = window
        self.params = {}
        self._cache = None

    def forward(self, x, train=False, rng=None):
        if self.window > x.shape[2]:
            raise InvalidArgumentError(f"pool window {self.window} exceeds time length {x.shape[2]}")
        out, arg = _kernels.maxpool_time(np.ascontiguousarray(x), self.window)
        if train:
            self._cache = (arg, x.shape[2])
        return out

    def backward(self, dout, need_dx=True):
        arg, nh = self._take_cache()
        return _kernels.maxpool_time_backward(np.ascontiguousarray(dout), arg, self.window, nh), {}


class Flatten(Layer):
    """``(n_rx, batch, time, ch)`` to ``(batch, time * n_rx * ch)``, row-major in (time, rx, ch)."""

    name = "flatten"

    def __init__(self):
        self.params = {}
        self._cache = None

    def forward(self, x, train=False, rng=None):
        if train:
            self._cache = x.shape
        nb = x.shape[1]
        return np.ascontiguousarray(x.transpose(1, 2, 0, 3)).reshape(nb, -1)

    def backward(self, dout, need_dx=True):
        nw, nb, nh, nc = self._take_cache()
        return np.ascontiguousarray(dout.reshape(nb, nh, nw, nc).transpose(2, 0, 1, 3)), {}


class Dropout(Layer):
    """Inverted dropout; identity outside training or at rate 0."""

    name = "dropout"

    def __init__(self, rate):
        if not 0 <= rate < 1:
            raise InvalidArgumentError("dropout rate must be in [0, 1)")
        self.rate = rate
        self.params = {}
        self._cache = None

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0:
            if train:
                self._cache = 1
            return x
        if rng is None:
            raise StateError("dropout in train mode needs a random generator")
        mask = (rng.random(x.shape) >= self.rate).astype(x.dtype) / x.dtype.type(1 - self.rate)
        self._cache = mask
        return x * mask

    def backward(self, dout, need_dx=True):
        mask = self._take_cache()
        return dout * mask, {}


class Dense(Layer):
    """``out = W @ in + b`` with ``W`` of shape ``(n_out, n_in)``."""

    def __init__(self, n_in, n_out, name="dense", dtype=np.float64):
        self.n_in, self.n_out = n_in, n_out
        self.name = name
        self.params = {"weight": np.zeros((n_out, n_in), dtype), "bias": np.zeros(n_out, dtype)}
        self._cache = None

    @property
    def fan_in(self):
        return self.n_in

    def forward(self, x, train=False, rng=None):
        if x.shape[-1] != self.n_in:
            raise InvalidArgumentError(f"{self.name}: expected {self.n_in} features, got {x.shape[-1]}")
        if train:
            self._cache = x
        return x @ self.params["weight"].T + self.params["bias"]

    def backward(self, dout, need_dx=True):
        x = self._take_cache()
        grads = {"weight": dout.T @ x, "bias": dout.sum(axis=0)}
        return dout @ self.params["weight"], grads


def he_uniform(rng, shape, fan_in, dtype):
    """Zero-mean uniform weights with variance ``2 / fan_in``."""
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


# Conventional-layout entry points -------------------------------------------------

def _batched(x, ndim):
    x = np.asarray(x)
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim != ndim:
        raise InvalidArgumentError(f"expected {ndim - 1}- or {ndim}-D input, got shape {x.shape}")
    return x, False


def conv2d_forward(x, weights, bias):
    """Same-padded convolution of ``(h, w, c_in)`` (or batched) input with ``(kh, kw, c_in, c_out)``."""
    weights = np.asarray(weights)
    xb, single = _batched(x, 4)
    if weights.ndim != 4 or weights.shape[2] != xb.shape[3]:
        raise InvalidArgumentError(f"weights {weights.shape} do not match input {xb.shape}")
    bias = np.asarray(bias, dtype=weights.dtype)
    if bias.shape != (weights.shape[3],):
        raise InvalidArgumentError("bias must have one entry per output channel")
    kh, kw, c_in, c_out = weights.shape
    layer = Conv2D(kh, kw, c_in, c_out, dtype=weights.dtype)
    layer.params["weight"][...] = weights
    layer.params["bias"][...] = bias
    out = layer.forward(np.ascontiguousarray(xb.transpose(2, 0, 1, 3)).astype(weights.dtype))
    out = out.transpose(1, 2, 0, 3)
    return out[0] if single else out


def relu(x):
    return np.maximum(np.asarray(x), 0)


def maxpool(x, window):
    """Max over non-overlapping windows along axis 0 (time) of ``x``; remainder truncated."""
    x = np.asarray(x)
    if window < 1 or window > x.shape[0]:
        raise InvalidArgumentError(f"pool window {window} exceeds dimension {x.shape[0]}")
    n = x.shape[0] // window
    return x[: n * window].reshape((n, window) + x.shape[1:]).max(axis=1)


def dropout(x, rate, train, rng=None):
    layer = Dropout(rate)
    return layer.forward(np.asarray(x, dtype=float), train=train, rng=rng)


def dense(x, weight, bias):
    return np.asarray(x) @ np.asarray(weight).T + np.asarray(bias)


def flatten(x):
    x = np.asarray(x)
    return x.reshape(x.shape[0], -1)
