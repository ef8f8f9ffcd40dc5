"""Mini-batch Adam training with early stopping, and prediction in degrees."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DivergenceError, InvalidArgumentError
from .model import AdamState, CnnModel, adam_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 16
    max_epochs: int = 200
    patience: int = 20
    validation_fraction: float = 0.1
    # use every k-th training sample; consecutive heating steps are near duplicates
    sample_stride: int = 1

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1 or self.sample_stride < 1:
            raise InvalidArgumentError("batch_size, max_epochs, patience and sample_stride must be >= 1")
        if not 0 <= self.validation_fraction < 1:
            raise InvalidArgumentError("validation_fraction must be in [0, 1)")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    model: CnnModel
    history: list = field(default_factory=list)  # dicts: epoch, train_loss, val_loss
    best_epoch: int = 0
    batch_orders: list = field(default_factory=list, repr=False)

    @property
    def train_losses(self):
        return [h["train_loss"] for h in self.history]


def _streams(seed):
    ss = np.random.SeedSequence(seed)
    split, shuffle, dropout = ss.spawn(3)
    return (np.random.default_rng(split), np.random.default_rng(shuffle), np.random.default_rng(dropout))


def standardize_targets(model: CnnModel, targets):
    mean = targets.mean(axis=0)
    std = targets.std(axis=0)
    std = np.where(std > 1e-6 * max(1.0, float(np.abs(mean).max())), std, 1.0)
    model.target_mean = mean.astype(float)
    model.target_std = std.astype(float)
    return ((targets - mean) / std).astype(model.dtype)


def _eval_loss(model, x, y, chunk=256):
    total = 0.0
    for i in range(0, len(x), chunk):
        diff = model.forward(x[i:i + chunk]) - y[i:i + chunk]
        total += float(np.sum(diff.astype(float) ** 2))
    return total / y.size


def train(model: CnnModel, inputs, targets, config: TrainConfig = TrainConfig(), seed=0,
          index=None, record_batches=False) -> TrainResult:
    """Fit ``model`` to inputs ``(N, n_time, n_rx)`` and targets ``(N, n_pts)`` in degrees.

    ``index`` restricts training to those rows without copying the inputs.
    Targets are standardized column-wise with the statistics of the rows used.
    A seeded ``validation_fraction`` of the samples drives early stopping and the
    parameters with the lowest validation loss are restored at the end. With no
    validation samples the training loss is used instead.
    """
    inputs = np.asarray(inputs)
    targets = np.asarray(targets, dtype=float)
    if len(inputs) == 0:
        raise InvalidArgumentError("empty training set")
    if len(inputs) != len(targets):
        raise InvalidArgumentError("inputs and targets differ in length")
    if targets.ndim != 2 or targets.shape[1] != model.config.n_pts:
        raise InvalidArgumentError(f"targets must be (N, {model.config.n_pts})")

    split_rng, shuffle_rng, dropout_rng = _streams(seed)
    rows = np.arange(len(inputs)) if index is None else np.asarray(index, dtype=np.int64)
    if rows.size == 0:
        raise InvalidArgumentError("empty training set")
    rows = rows[::config.sample_stride]
    x_all = inputs if inputs.dtype == model.dtype else inputs.astype(model.dtype)
    y_all = np.zeros((len(targets), targets.shape[1]), model.dtype)
    y_all[rows] = standardize_targets(model, targets[rows])

    n = rows.size
    n_val = int(round(config.validation_fraction * n))
    if n_val >= n:
        n_val = n - 1
    order = split_rng.permutation(n)
    val_idx = np.sort(rows[order[:n_val]])
    train_idx = np.sort(rows[order[n_val:]])
    x_val, y_val = x_all[val_idx], y_all[val_idx]

    opt = AdamState(config.learning_rate, config.beta1, config.beta2, config.epsilon)
    params = model.params
    model.rng = dropout_rng
    result = TrainResult(model=model)
    best_loss = np.inf
    best_params = model.copy_params()
    since_best = 0

    for epoch in range(1, config.max_epochs + 1):
        model.train()
        perm = train_idx[shuffle_rng.permutation(train_idx.size)]
        if record_batches:
            result.batch_orders.append(perm.copy())
        batch_losses = []
        for start in range(0, perm.size, config.batch_size):
            idx = np.sort(perm[start:start + config.batch_size])
            loss, grads = model.loss_and_grads(x_all[idx], y_all[idx])
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            adam_step(opt, params, grads)
            batch_losses.append(loss * idx.size)
        train_loss = float(np.sum(batch_losses) / perm.size)
        model.eval()
        val_loss = _eval_loss(model, x_val, y_val) if n_val else train_loss
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise DivergenceError(epoch)
        result.history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        log.debug("epoch %d train %.5f val %.5f", epoch, train_loss, val_loss)
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = model.copy_params()
            result.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    model.set_params(best_params)
    model.eval()
    model.rng = None
    return result


def predict(model: CnnModel, inputs, chunk=256):
    """Temperatures (C) for ``(N, n_time, n_rx)`` inputs, or one ``(n_time, n_rx)`` sample."""
    x = np.asarray(inputs)
    single = x.ndim == 2 or (x.ndim == 3 and x.shape[-1] == 1 and x.shape[:2] == model.config.input_shape)
    if single:
        x = x[None]
    if x.ndim not in (3, 4) or tuple(x.shape[1:3]) != model.config.input_shape:
        raise InvalidArgumentError(f"input shape {np.shape(inputs)} does not match {model.config.input_shape}")
    mode = model.mode
    model.eval()
    out = np.concatenate([model.forward(x[i:i + chunk]) for i in range(0, len(x), chunk)])
    if mode == "train":
        model.train()
    temps = out.astype(float) * model.target_std + model.target_mean
    return temps[0] if single else temps
