"""Mini-batch training loop with early stopping, plus inference helpers."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from ..numeric import SeededRng
from . import functional as F
from .augment import AugmentConfig, augment
from .network import Network, NetworkSpec
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

SHUFFLE_STREAM = 201
AUGMENT_STREAM = 202


@dataclass
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 12
    augmentation: bool = True
    seed: int = 0
    validation_fraction: float = 0.2
    learning_rate: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    keep_prob: float = 0.5
    activation: str = "mish"

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2 (batch norm)")


@dataclass
class TrainingHistory:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    best_epoch: int = 0  # 1-based
    stopped_epoch: int = 0

    def rows(self):
        for i in range(len(self.val_loss)):
            yield i + 1, self.train_loss[i], self.train_acc[i], self.val_loss[i], self.val_acc[i]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\r\n")
            wr.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
            for row in self.rows():
                wr.writerow([row[0]] + [f"{v:.6g}" for v in row[1:]])


class EarlyStopping:
    """Track the best validation loss and decide when to stop.

    Training stops once ``patience`` consecutive epochs fail to improve
    on the best loss; the snapshot from the best epoch is kept.
    """

    def __init__(self, patience: int):
        if patience < 1:
            raise ValueError("patience must be at least 1")
        self.patience = patience
        self.best_loss = np.inf
        self.best_epoch = 0
        self.best_state = None
        self.epoch = 0
        self.wait = 0

    def update(self, val_loss: float, snapshot=None) -> bool:
        """Record one epoch; return True when training should stop.

        ``snapshot`` is a zero-argument callable, only invoked on improvement.
        """
        self.epoch += 1
        if val_loss < self.best_loss:
            self.best_loss = val_loss
            self.best_epoch = self.epoch
            self.wait = 0
            if snapshot is not None:
                self.best_state = snapshot()
        else:
            self.wait += 1
        return self.wait >= self.patience


def _check_set(name, data, class_count):
    x, y = data
    if len(x) == 0:
        raise ValueError(f"{name} set is empty")
    if len(x) != len(y):
        raise ValueError(f"{name} images and labels are not aligned")
    if np.max(y) >= class_count or np.min(y) < 0:
        raise ValueError(f"{name} labels must lie in [0, {class_count})")


def evaluate_network(net: Network, images, labels, batch_size=64):
    """Inference-mode accuracy and mean cross-entropy."""
    labels = np.asarray(labels)
    if len(images) != len(labels):
        raise ValueError("images and labels are not aligned")
    total_loss, correct = 0.0, 0
    for i in range(0, len(images), batch_size):
        logits = net.forward(images[i:i + batch_size], training=False)
        yb = labels[i:i + batch_size]
        loss, _ = F.softmax_cross_entropy(logits.astype(np.float64), yb)
        total_loss += loss * len(yb)
        correct += int((np.argmax(logits, axis=1) == yb).sum())
    return correct / len(labels), total_loss / len(labels)


def train(spec: NetworkSpec, train_set, val_set, cfg: TrainConfig = TrainConfig(),
          aug_cfg: AugmentConfig | None = None, dtype=np.float32, progress=None):
    """Fit ``spec`` with Adam; return ``(best_state, history, network)``.

    ``train_set`` / ``val_set`` are ``(images, labels)`` pairs. The network
    is left loaded with the best-validation-loss weights.
    """
    _check_set("training", train_set, spec.class_count)
    _check_set("validation", val_set, spec.class_count)
    x_train, y_train = np.asarray(train_set[0], dtype=dtype), np.asarray(train_set[1])
    x_val, y_val = np.asarray(val_set[0], dtype=dtype), np.asarray(val_set[1])
    if aug_cfg is None:
        aug_cfg = AugmentConfig() if cfg.augmentation else AugmentConfig.disabled()

    net = Network(spec, seed=cfg.seed, dtype=dtype)
    params = {k: p for k, p, _ in net.parameters()}
    opt = AdamState(lr=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    shuffle_rng = SeededRng(cfg.seed, SHUFFLE_STREAM)
    aug_rng = SeededRng(cfg.seed, AUGMENT_STREAM)
    stopper = EarlyStopping(cfg.patience)
    hist = TrainingHistory()
    n = len(x_train)

    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        # drop a trailing batch of one: batch norm cannot normalise it
        if n % cfg.batch_size == 1 and n > 1:
            order = order[:-1]
        seen, loss_sum, correct = 0, 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb = x_train[idx]
            if cfg.augmentation:
                xb = np.stack([augment(img, aug_rng, aug_cfg) for img in xb])
            loss, logits = net.loss_and_grads(xb, y_train[idx], training=True)
            adam_step(params, {k: g for k, _, g in net.parameters()}, opt)
            loss_sum += loss * len(idx)
            correct += int((np.argmax(logits, axis=1) == y_train[idx]).sum())
            seen += len(idx)
        val_acc, val_loss = evaluate_network(net, x_val, y_val)
        hist.train_loss.append(loss_sum / seen)
        hist.train_acc.append(correct / seen)
        hist.val_loss.append(val_loss)
        hist.val_acc.append(val_acc)
        stop = stopper.update(val_loss, net.state)
        log.info("epoch %d: loss %.4f acc %.4f val_loss %.4f val_acc %.4f",
                 epoch, hist.train_loss[-1], hist.train_acc[-1], val_loss, val_acc)
        if progress is not None:
            progress(epoch, hist)
        if stop:
            break

    hist.best_epoch = stopper.best_epoch
    hist.stopped_epoch = stopper.epoch
    net.load_state(stopper.best_state)
    return stopper.best_state, hist, net


def predict(net: Network, weights, images) -> np.ndarray:
    if weights is not None:
        net.load_state(weights)
    return np.argmax(net.predict_proba(images), axis=1)


def evaluate(net: Network, weights, images, labels):
    """``(accuracy, mean loss)`` in inference mode."""
    if weights is not None:
        net.load_state(weights)
    return evaluate_network(net, np.asarray(images, dtype=net.dtype), labels)
