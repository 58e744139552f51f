"""Minibatch SGD with momentum, gradient-norm clipping and early stopping."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from . import layers as L
from .network import NEGATIVE, POSITIVE, NetworkSpec, TrainedModel, backward, forward, init_model

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    max_epochs: int = 400
    clip_norm: float = 1.0
    # "global": one L2 norm over all gradients; "per-parameter": each tensor clipped on its own
    clip_mode: str = "global"
    train_fraction: float = 0.7
    patience: int = 20
    # validation-loss drop that counts as an improvement for early stopping
    min_delta: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.clip_norm <= 0:
            raise ValueError("clip threshold must be positive")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train fraction must be in (0, 1)")
        if not 1 <= self.max_epochs <= 400:
            raise ValueError("max_epochs must be in [1, 400]")
        if self.batch_size < 2:
            raise ValueError("batch normalization needs batches of at least 2")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.clip_mode not in ("global", "per-parameter"):
            raise ValueError(f"unknown clip mode {self.clip_mode!r}")
        if self.patience < 1 or self.min_delta < 0:
            raise ValueError("patience must be >= 1 and min_delta >= 0")

    @property
    def validation_fraction(self) -> float:
        return 1.0 - self.train_fraction


@dataclass
class History:
    epoch: list
    train_acc: list
    val_acc: list
    train_loss: list
    val_loss: list
    grad_norms: list        # pre-clipping global norm per step
    clipped_norms: list     # post-clipping global norm per step
    best_epoch: int = 0

    def rows(self):
        return zip(self.epoch, self.train_acc, self.val_acc, self.train_loss, self.val_loss)


def clip_gradients(grads: dict, threshold: float, mode: str = "global"):
    """Rescale gradients in place; returns (norm before, norm after) over all tensors."""
    before = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values())))
    if mode == "global":
        if before > threshold:
            s = threshold / before
            for k in grads:
                grads[k] = grads[k] * grads[k].dtype.type(s)
    else:
        for k, g in grads.items():
            n = float(np.linalg.norm(g.ravel().astype(np.float64)))
            if n > threshold:
                grads[k] = g * g.dtype.type(threshold / n)
    after = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values())))
    return before, after


def split_indices(labels, train_fraction: float, seed: int):
    """Seeded stratified shuffle split; both parts keep both classes when possible."""
    rng = np.random.default_rng(seed)
    train, val = [], []
    for cls in (POSITIVE, NEGATIVE):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        cut = int(round(train_fraction * len(idx)))
        cut = min(max(cut, 1), len(idx) - 1) if len(idx) > 1 else len(idx)
        train.append(idx[:cut])
        val.append(idx[cut:])
    train = np.concatenate(train)
    val = np.concatenate(val)
    return train[rng.permutation(len(train))], np.sort(val)


def _as_float(images):
    if images.dtype == np.uint8:
        return images.astype(np.float32) / np.float32(255.0)
    return images.astype(np.float32, copy=False)


def evaluate_batches(model: TrainedModel, images, labels, batch_size: int = 64):
    """Infer-mode (loss, accuracy) over a labelled set."""
    if len(labels) == 0:
        return float("nan"), float("nan")
    total_loss = 0.0
    correct = 0
    for s in range(0, len(labels), batch_size):
        x = _as_float(images[s:s + batch_size])
        y = labels[s:s + batch_size]
        logits, _ = forward(model, x, "infer")
        logits = logits.astype(np.float64)
        loss, _ = L.softmax_cross_entropy(logits, y)
        total_loss += loss * len(y)
        correct += int(np.sum(_predicted(logits) == y))
    return total_loss / len(labels), correct / len(labels)


def _predicted(logits):
    # ties go to the negative class
    return np.where(logits[:, POSITIVE] > logits[:, NEGATIVE], POSITIVE, NEGATIVE)


def train(spec: NetworkSpec, images, labels, cfg: TrainConfig = TrainConfig(),
          category: str | None = None, progress=None):
    """Train one binary classifier.

    ``images`` is an (N, 3, H, W) array (uint8 or float in [0, 1]); ``labels``
    holds class indices, 0 for the artifact category and 1 for everything else.
    Returns the parameters with the lowest validation loss and the history.
    """
    labels = np.asarray(labels, dtype=np.intp)
    if labels.ndim != 1 or len(labels) != len(images):
        raise DataError("one label per image is required")
    classes = set(np.unique(labels).tolist())
    if not classes <= {POSITIVE, NEGATIVE}:
        raise DataError(f"labels must be {POSITIVE} (positive) or {NEGATIVE} (negative)")
    if len(classes) < 2:
        raise DataError("training data must contain both positive and negative examples")

    train_idx, val_idx = split_indices(labels, cfg.train_fraction, cfg.seed)
    x_val, y_val = images[val_idx], labels[val_idx]
    model = init_model(spec, cfg.seed, category)
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    rng = np.random.default_rng(cfg.seed + 1)
    lr = np.float32(cfg.learning_rate)
    mu = np.float32(cfg.momentum)

    hist = History([], [], [], [], [], [], [])
    best = (np.inf, model.copy(), 0)
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = train_idx[rng.permutation(len(train_idx))]
        seen = correct = 0
        loss_sum = 0.0
        for s in range(0, len(order), cfg.batch_size):
            batch = np.sort(order[s:s + cfg.batch_size])
            if len(batch) < 2:
                continue  # batchnorm needs two examples
            x = _as_float(images[batch])
            y = labels[batch]
            logits, cache = forward(model, x, "train")
            loss, _ = L.softmax_cross_entropy(logits.astype(np.float64), y)
            grads = backward(model, cache, y)
            before, after = clip_gradients(grads, cfg.clip_norm, cfg.clip_mode)
            hist.grad_norms.append(before)
            hist.clipped_norms.append(after)
            for k, g in grads.items():
                v = velocity[k]
                v *= mu
                v -= lr * g
                model.params[k] += v
            model.buffers.update(cache.running)
            loss_sum += loss * len(y)
            correct += int(np.sum(_predicted(logits) == y))
            seen += len(y)

        val_loss, val_acc = evaluate_batches(model, x_val, y_val)
        hist.epoch.append(epoch)
        hist.train_loss.append(loss_sum / max(seen, 1))
        hist.train_acc.append(correct / max(seen, 1))
        hist.val_loss.append(val_loss)
        hist.val_acc.append(val_acc)
        log.info("%s epoch %d train_loss %.4f train_acc %.4f val_loss %.4f val_acc %.4f",
                 spec.name, epoch, hist.train_loss[-1], hist.train_acc[-1], val_loss, val_acc)
        if progress is not None:
            progress(epoch, hist)

        if val_loss < best[0]:
            if val_loss < best[0] - cfg.min_delta:
                stale = 0
            else:
                stale += 1
            best = (val_loss, model.copy(), epoch)
        else:
            stale += 1
        if stale >= cfg.patience:
            break

    result = best[1]
    hist.best_epoch = best[2]
    result.metadata.update({
        "category": category or spec.name,
        "seed": cfg.seed,
        "epochs": hist.epoch[-1],
        "best_epoch": best[2],
    })
    return result, hist
