"""Loss, optimizer, and the training loop for the detector."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .layers import Sigmoid
from .network import CnnModel

PRED_CLIP = 1e-7  # keeps log terms finite when predictions saturate


def bce_loss(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy with predictions clipped away from {0, 1}."""
    p = np.clip(np.asarray(predictions, dtype=np.float64), PRED_CLIP, 1.0 - PRED_CLIP)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def bce_sigmoid_grad(predictions: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the mean BCE with respect to the pre-sigmoid activation.

    The sigmoid derivative cancels the cross-entropy denominator, giving the
    numerically stable (p - y) / N even when p saturates.
    """
    p = np.asarray(predictions)
    y = np.asarray(labels, dtype=p.dtype)
    return (p - y) / len(p)


class Adam:
    """Adam over the model's trainable parameters, state keyed by identity."""

    def __init__(self, learning_rate: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-7):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[tuple[int, str], np.ndarray] = {}
        self._v: dict[tuple[int, str], np.ndarray] = {}

    def step(self, model: CnnModel) -> None:
        self.t += 1
        # python-float scalars so float32 parameters stay float32 under NEP 50
        lr_t = float(self.learning_rate * np.sqrt(1.0 - self.beta2**self.t)
                     / (1.0 - self.beta1**self.t))
        for layer_index, layer in enumerate(model.layers):
            for name, grad in layer.grads.items():
                key = (layer_index, name)
                if key not in self._m:
                    self._m[key] = np.zeros_like(grad)
                    self._v[key] = np.zeros_like(grad)
                m = self._m[key] = self.beta1 * self._m[key] + (1 - self.beta1) * grad
                v = self._v[key] = self.beta2 * self._v[key] + (1 - self.beta2) * grad**2
                layer.params[name] = layer.params[name] - lr_t * m / (np.sqrt(v) + self.eps)


class EarlyStopper:
    """Stops after ``patience`` epochs whose validation loss failed to improve.

    By default every non-improving epoch counts toward the budget; with
    ``consecutive=True``, an improvement resets the counter.
    """

    def __init__(self, patience: int = 3, consecutive: bool = False):
        self.patience = patience
        self.consecutive = consecutive
        self.best = np.inf
        self.best_epoch = -1
        self.bad_epochs = 0

    def update(self, loss: float, epoch: int) -> bool:
        """Record one epoch's validation loss; True means stop now."""
        if loss < self.best:
            self.best = loss
            self.best_epoch = epoch
            if self.consecutive:
                self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    patience: int = 3
    consecutive_patience: bool = False
    max_epochs: int = 30
    seed: int = 0


@dataclass
class TrainHistory:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False


def train(model: CnnModel, train_x: np.ndarray, train_y: np.ndarray,
          val_x: np.ndarray, val_y: np.ndarray, config: TrainConfig) -> TrainHistory:
    """Train with Adam, monitoring validation loss for early stopping.

    Returns the loss history; the model is left holding the weights of the
    best-validation epoch.
    """
    if len(train_x) == 0 or len(val_x) == 0:
        raise ValueError("training and validation splits must be nonempty")
    if not isinstance(model.layers[-1], Sigmoid):
        raise ValueError("the training loop expects a sigmoid output layer")

    rng = np.random.default_rng(config.seed)
    optimizer = Adam(config.learning_rate, config.beta1, config.beta2)
    stopper = EarlyStopper(config.patience, config.consecutive_patience)
    history = TrainHistory()
    best_state = model.get_state()

    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_x))
        batch_losses = []
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            x, y = train_x[idx], train_y[idx]
            p = model.forward(x, training=True)
            batch_losses.append(bce_loss(p, y))
            if not np.isfinite(batch_losses[-1]):
                raise FloatingPointError(
                    f"non-finite training loss at epoch {epoch}, batch {lo // config.batch_size}"
                )
            dout = bce_sigmoid_grad(p, y).astype(p.dtype).reshape(-1, 1)
            for layer in reversed(model.layers[:-1]):  # sigmoid handled by the fused grad
                dout = layer.backward(dout)
            optimizer.step(model)
        history.train_losses.append(float(np.mean(batch_losses)))

        val_loss = bce_loss(model.predict(val_x, config.batch_size), val_y)
        history.val_losses.append(val_loss)
        improved = val_loss < stopper.best
        stop = stopper.update(val_loss, epoch)
        if improved:
            best_state = model.get_state()
        if stop:
            history.stopped_early = True
            break

    history.best_epoch = stopper.best_epoch
    model.set_state(best_state)
    return history


def classify(model: CnnModel, spectrogram_values: np.ndarray, threshold: float) -> int:
    """Threshold decision on one spectrogram: 1 (jammed) iff score >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    x = np.asarray(spectrogram_values, dtype=np.float32)[None, :, :, None]
    score = float(model.predict(x, batch_size=1)[0])
    return 1 if score >= threshold else 0


def save_history_csv(history: TrainHistory, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for i, (tr, va) in enumerate(zip(history.train_losses, history.val_losses)):
            writer.writerow([i, repr(tr), repr(va)])
