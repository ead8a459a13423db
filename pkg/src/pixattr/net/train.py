"""Training loop: minibatch SGD with momentum, plateau decay, early stopping.

The loop is single-threaded and fully determined by TrainSpec.seed. Validation
loss drives both the plateau learning-rate decay and early stopping; the
returned model carries the best-validation weights seen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainSpec:
    epochs: int = 500
    patience: int = 15
    batch_size: int = 128
    lr: float = 0.01
    plateau_factor: float = 0.1
    plateau_patience: int = 5
    clip_norm: float | None = None
    momentum: float = 0.9
    seed: int = 0
    eval_chunk: int = 256

    def __post_init__(self):
        for name in ("epochs", "patience", "batch_size", "lr", "plateau_factor", "plateau_patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def ce_loss(probs: np.ndarray, labels: np.ndarray):
    """Cross entropy against integer labels; returns (loss, grad wrt probs)."""
    n = probs.shape[0]
    idx = (np.arange(n), labels)
    p = np.maximum(probs[idx], 1e-12)
    loss = float(-np.mean(np.log(p)))
    grad = np.zeros_like(probs)
    grad[idx] = -1.0 / (p * n)
    return loss, grad


def grouped_ce_loss(probs: np.ndarray, labels: np.ndarray, groups: int):
    """Cross entropy per group; labels shape (N, groups)."""
    n, f = probs.shape
    k = f // groups
    p3 = probs.reshape(n, groups, k)
    ii = np.arange(n)[:, None], np.arange(groups)[None, :], labels
    p = np.maximum(p3[ii], 1e-12)
    loss = float(-np.mean(np.log(p)))
    grad3 = np.zeros_like(p3)
    grad3[ii] = -1.0 / (p * n * groups)
    return loss, grad3.reshape(n, f)


def mse_loss(pred: np.ndarray, target: np.ndarray):
    diff = pred - target
    loss = float(np.mean(diff**2))
    return loss, 2.0 * diff / diff.size


def make_loss(kind: str, groups: int | None = None):
    if kind == "ce":
        return ce_loss
    if kind == "grouped_ce":
        return lambda p, y: grouped_ce_loss(p, y, groups)
    if kind == "mse":
        return mse_loss
    raise ValueError(f"unknown loss {kind!r}")


class SGD:
    def __init__(self, params, lr: float, momentum: float):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.value) for p in params]

    def step(self):
        for p, v in zip(self.params, self.velocity):
            v *= self.momentum
            v -= self.lr * p.grad
            p.value += v


def global_grad_norm(params) -> float:
    total = 0.0
    for p in params:
        total += float(np.sum(p.grad**2))
    return math.sqrt(total)


def clip_gradients(params, max_norm: float) -> float:
    """Scale all gradients so their global norm is at most max_norm."""
    norm = global_grad_norm(params)
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params:
            p.grad *= scale
    return min(norm, max_norm)


def _forward(model, x, train):
    if isinstance(x, tuple):
        return model.forward(x[0], x[1], train=train)
    return model.forward(x, train=train)


def _index(x, idx):
    if isinstance(x, tuple):
        return (x[0][idx], x[1][idx])
    return x[idx]


def _length(x) -> int:
    return x[0].shape[0] if isinstance(x, tuple) else x.shape[0]


def evaluate_loss(model, x, y, loss_fn, chunk: int = 256) -> float:
    n = _length(x)
    total = 0.0
    for start in range(0, n, chunk):
        idx = slice(start, min(start + chunk, n))
        out = _forward(model, _index(x, idx), train=False)
        loss, _ = loss_fn(out, y[idx])
        total += loss * (idx.stop - idx.start)
    return total / n


def _snapshot(model):
    return (
        [p.value.copy() for p in model.params()],
        [s.copy() for s in model.state_arrays()],
    )


def _restore(model, snap):
    values, states = snap
    for p, v in zip(model.params(), values):
        p.value[...] = v
    for s, v in zip(model.state_arrays(), states):
        s[...] = v


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


def train(model, train_data, val_data, spec: TrainSpec, loss: str = "ce",
          groups: int | None = None) -> list[EpochRecord]:
    """Fit the model in place; returns the per-epoch history.

    train_data / val_data are (x, labels) where x is an input array or an
    (x_a, x_b) tuple for siamese pairs.
    """
    x_train, y_train = train_data
    x_val, y_val = val_data
    n = _length(x_train)
    if n == 0:
        raise ValueError("empty training set")
    loss_fn = make_loss(loss, groups)
    rng = np.random.default_rng(spec.seed)
    opt = SGD(model.params(), spec.lr, spec.momentum)

    history: list[EpochRecord] = []
    best_val = math.inf
    best_snap = _snapshot(model)
    since_best = 0
    since_decay = 0
    for epoch in range(spec.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, spec.batch_size):
            idx = order[start : start + spec.batch_size]
            model.zero_grads()
            out = _forward(model, _index(x_train, idx), train=True)
            loss_val, grad = loss_fn(out, y_train[idx])
            if not math.isfinite(loss_val):
                raise TrainingDiverged(
                    f"non-finite loss {loss_val} at epoch {epoch}, sample {start}"
                )
            # float64 targets must not upcast a float32 model's backward pass
            model.backward(grad.astype(out.dtype, copy=False))
            if spec.clip_norm is not None:
                clip_gradients(model.params(), spec.clip_norm)
            opt.step()
            total += loss_val * idx.size
        train_loss = total / n
        val_loss = evaluate_loss(model, x_val, y_val, loss_fn, spec.eval_chunk)
        history.append(EpochRecord(epoch, train_loss, val_loss, opt.lr))

        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_snap = _snapshot(model)
            since_best = 0
            since_decay = 0
        else:
            since_best += 1
            since_decay += 1
        if since_best >= spec.patience:
            break
        if since_decay >= spec.plateau_patience:
            opt.lr *= spec.plateau_factor
            since_decay = 0
    _restore(model, best_snap)
    return history
