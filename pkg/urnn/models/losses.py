"""
Losses and metrics for the benchmark objectives.

Cross entropy is measured in nats. Every loss is averaged over the batch (and
over time steps for the per-step copy loss), and the returned output
gradients already include that averaging.
"""

from typing import Tuple

import numpy as np

from urnn.core.errors import DataError, ShapeError
from urnn.tasks.batch import TaskBatch

RECALL_STEPS = 10


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _softmax_xent(logits: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    n_classes = logits.shape[-1]
    targets = np.asarray(targets)
    if logits.shape[:-1] != targets.shape:
        raise ShapeError(f"logits {logits.shape} do not match targets {targets.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= n_classes):
        raise DataError(f"targets must lie in [0, {n_classes}), got range [{targets.min()}, {targets.max()}]")

    idx = targets[..., None].astype(np.intp)
    logp = log_softmax(logits)
    picked = np.take_along_axis(logp, idx, axis=-1)[..., 0]
    count = targets.size
    loss = -float(np.sum(picked)) / count

    grad = np.exp(logp)
    np.put_along_axis(grad, idx, np.take_along_axis(grad, idx, axis=-1) - 1.0, axis=-1)
    return loss, grad / count


def cross_entropy_per_step(outputs: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean softmax cross entropy over (batch, T); gradient (softmax - onehot) / (T * batch)"""
    if outputs.ndim != 3:
        raise ShapeError(f"per-step outputs must be (batch, T, n_o), got {outputs.shape}")
    return _softmax_xent(outputs, targets)


def cross_entropy_final(outputs: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    if outputs.ndim != 2:
        raise ShapeError(f"final outputs must be (batch, n_o), got {outputs.shape}")
    return _softmax_xent(outputs, targets)


def mse_final(outputs: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean of (output - target)^2 over the batch, with gradient 2 (output - target) / batch"""
    if outputs.ndim != 2 or outputs.shape[1] != 1:
        raise ShapeError(f"regression outputs must be (batch, 1), got {outputs.shape}")
    err = outputs[:, 0] - np.asarray(targets, dtype=float)
    batch = err.shape[0]
    return float(np.sum(err * err)) / batch, (2.0 * err / batch)[:, None]


def accuracy(outputs: np.ndarray, targets: np.ndarray) -> float:
    return float(np.mean(np.argmax(outputs, axis=-1) == targets))


def recall_accuracy(outputs: np.ndarray, targets: np.ndarray, steps: int = RECALL_STEPS) -> float:
    """Accuracy over the final recall steps of the copy task"""
    return accuracy(outputs[:, -steps:], targets[:, -steps:])


def task_loss(batch: TaskBatch, outputs: np.ndarray) -> Tuple[float, np.ndarray]:
    if batch.objective == "copy":
        return cross_entropy_per_step(outputs, batch.targets)
    if batch.objective == "regression":
        return mse_final(outputs, batch.targets)
    return cross_entropy_final(outputs, batch.targets)


def task_metric(batch: TaskBatch, outputs: np.ndarray) -> float:
    """Recall accuracy (copy), MSE (regression) or accuracy (classification)"""
    if batch.objective == "copy":
        return recall_accuracy(outputs, batch.targets)
    if batch.objective == "regression":
        return mse_final(outputs, batch.targets)[0]
    return accuracy(outputs, batch.targets)
