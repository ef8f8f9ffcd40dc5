"""CNN regressor: (Conv -> ReLU -> MaxPool) blocks, Flatten, Dropout, Dense."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvalidArgumentError, StateError
from .layers import Conv2D, Dense, Dropout, Flatten, MaxPool, ReLU, he_uniform


@dataclass(frozen=True)
class CnnConfig:
    n_blocks: int = 3
    base_filters: int = 8
    kernel_time: int = 16
    kernel_rx: int = 2
    pool_time: int = 4
    dropout_rate: float = 0.2
    n_pts: int = 25
    input_shape: tuple = (1024, 3)

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        if len(self.input_shape) != 2 or min(self.input_shape) < 1:
            raise InvalidArgumentError("input_shape must be (n_time, n_rx)")
        if self.n_blocks < 1 or self.base_filters < 1 or self.kernel_time < 1 or self.kernel_rx < 1:
            raise InvalidArgumentError("block count, filters and kernel sizes must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise InvalidArgumentError("dropout_rate must be in [0, 1)")
        if self.n_pts < 1:
            raise InvalidArgumentError("n_pts must be positive")
        n_time = self.input_shape[0]
        for block in range(self.n_blocks):
            if self.pool_time < 1 or self.pool_time > n_time:
                raise InvalidArgumentError(
                    f"pool window {self.pool_time} exceeds time length {n_time} at block {block + 1}")
            n_time //= self.pool_time

    @property
    def n_time(self):
        return self.input_shape[0]

    @property
    def n_rx(self):
        return self.input_shape[1]

    @property
    def effective_kernel_rx(self):
        return min(self.kernel_rx, self.n_rx)

    def filters(self, block):
        """Filter count of 1-based ``block``: doubles every block."""
        return self.base_filters * 2 ** (block - 1)

    @property
    def pooled_time(self):
        n = self.n_time
        for _ in range(self.n_blocks):
            n //= self.pool_time
        return n

    @property
    def feature_length(self):
        return self.pooled_time * self.n_rx * self.filters(self.n_blocks)

    def to_dict(self):
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def mse_loss(pred, target):
    diff = pred - target
    return float(np.mean(diff * diff))


class CnnModel:
    """Network built from a :class:`CnnConfig`.

    Inputs are ``(batch, n_time, n_rx)`` or ``(batch, n_time, n_rx, 1)``; outputs are
    ``(batch, n_pts)`` in standardized target units. ``predict`` in
    :mod:`thermoscope.cnn.training` maps them back to degrees.
    """

    def __init__(self, config: CnnConfig, seed=0, dtype=np.float32):
        self.config = config
        self.dtype = np.dtype(dtype)
        self.mode = "eval"
        self.rng = None  # dropout stream, installed by the trainer
        self.target_mean = np.zeros(config.n_pts)
        self.target_std = np.ones(config.n_pts)
        self.layers = []
        c_in = 1
        kw = config.effective_kernel_rx
        for block in range(1, config.n_blocks + 1):
            c_out = config.filters(block)
            self.layers += [
                Conv2D(config.kernel_time, kw, c_in, c_out, name=f"conv{block}", dtype=self.dtype),
                ReLU(),
                MaxPool(config.pool_time),
            ]
            c_in = c_out
        self.layers += [Flatten(), Dropout(config.dropout_rate),
                        Dense(config.feature_length, config.n_pts, name="dense", dtype=self.dtype)]
        self._has_forward = False
        self.initialize(seed)

    def initialize(self, seed):
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            if "weight" in layer.params:
                w = layer.params["weight"]
                w[...] = he_uniform(rng, w.shape, layer.fan_in, self.dtype)
                layer.params["bias"][...] = 0

    @property
    def params(self):
        """Flat name -> array mapping; arrays are shared with the layers."""
        out = {}
        for layer in self.layers:
            for key, arr in layer.params.items():
                out[f"{layer.name}.{key}"] = arr
        return out

    def set_params(self, values):
        params = self.params
        if set(values) != set(params):
            raise InvalidArgumentError("parameter names do not match the model")
        for key, arr in values.items():
            if params[key].shape != np.shape(arr):
                raise InvalidArgumentError(f"{key}: shape {np.shape(arr)} != {params[key].shape}")
            params[key][...] = arr

    def copy_params(self):
        return {k: v.copy() for k, v in self.params.items()}

    @property
    def n_parameters(self):
        return sum(v.size for v in self.params.values())

    def train(self):
        self.mode = "train"
        return self

    def eval(self):
        self.mode = "eval"
        self._has_forward = False
        for layer in self.layers:
            layer.clear()
        return self

    def _to_internal(self, x):
        x = np.asarray(x)
        if x.ndim == 4:
            if x.shape[3] != 1:
                raise InvalidArgumentError("input must have a single channel")
            x = x[..., 0]
        if x.ndim != 3 or x.shape[1:] != self.config.input_shape:
            raise InvalidArgumentError(
                f"input shape {x.shape} does not match (batch,) + {self.config.input_shape}")
        return np.ascontiguousarray(x.transpose(2, 0, 1).astype(self.dtype, copy=False))[..., None]

    def forward(self, x):
        train = self.mode == "train"
        h = self._to_internal(x)
        for layer in self.layers:
            h = layer.forward(h, train=train, rng=self.rng)
        self._has_forward = train
        self._last_output = h if train else None
        return h

    __call__ = forward

    def backward(self, target, input_grad=False):
        """Gradients of the batch-mean squared error for the cached forward pass.

        Returns ``(loss, grads)``; with ``input_grad`` the gradient w.r.t. the
        input is included under ``"input"`` in ``(batch, n_time, n_rx)`` layout.
        """
        if not self._has_forward:
            raise StateError("backward() needs a preceding forward() in train mode")
        output = self._last_output
        target = np.asarray(target, dtype=self.dtype)
        if target.shape != output.shape:
            raise InvalidArgumentError(f"target shape {target.shape} != output shape {output.shape}")
        diff = output - target
        loss = float(np.mean(diff * diff))
        grad = (2.0 / diff.size) * diff
        grads = {}
        first = self.layers[0]
        for layer in reversed(self.layers):
            need_dx = input_grad or layer is not first
            grad, g = layer.backward(grad, need_dx=need_dx)
            for key, val in g.items():
                grads[f"{layer.name}.{key}"] = val
        if input_grad:
            grads["input"] = grad[..., 0].transpose(1, 2, 0)
        self._has_forward = False
        return loss, grads

    def loss_and_grads(self, x, target, input_grad=False):
        self.forward(x)
        return self.backward(target, input_grad=input_grad)


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step_count: int = 0

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidArgumentError("Adam betas must lie in [0, 1)")
        if self.epsilon <= 0:
            raise InvalidArgumentError("Adam epsilon must be positive")


def adam_step(state: AdamState, params, grads):
    """Bias-corrected Adam update applied in place; returns ``params``."""
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise InvalidArgumentError(f"{key}: gradient shape {g.shape} != parameter shape {p.shape}")
        if key not in state.m:
            state.m[key] = np.zeros_like(p)
            state.v[key] = np.zeros_like(p)
        m, v = state.m[key], state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= (state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)).astype(p.dtype, copy=False)
    return params
