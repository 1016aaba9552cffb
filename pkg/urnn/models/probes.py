"""
Diagnostics of how a model carries information through time: gradient norms
with respect to the hidden states, hidden-state norms and their distance to
the final state, and (on the adding task) how the prediction correlates with
each marked value.
"""

from typing import Dict, Tuple

import numpy as np

from urnn.core.errors import DataError
from urnn.models.registry import as_model
from urnn.tasks.batch import TaskBatch


def gradient_norm_probe(model, batch: TaskBatch) -> np.ndarray:
    """|dC/dh_t| for t = 1..T from one BPTT pass, stacked-real norm over the batch"""
    return as_model(model).loss_and_grads(batch).hidden_grad_norms


def hidden_norm_probe(model, batch: TaskBatch) -> Tuple[np.ndarray, np.ndarray]:
    """Per-step |h_t| and |h_t - h_T|, each averaged over the batch"""
    model = as_model(model)
    tape, _ = model.forward(batch.inputs, batch.per_step)
    hs = model.hidden_states(tape)
    norms = np.linalg.norm(hs, axis=-1).mean(axis=0)
    if hs.shape[1] == 0:
        return norms, norms.copy()
    dist = np.linalg.norm(hs - hs[:, -1:], axis=-1).mean(axis=0)
    return norms, dist


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.sum(a * a) * np.sum(b * b))
    return float(np.sum(a * b) / denom) if denom > 0 else 0.0


def output_correlation_probe(model, batch: TaskBatch) -> Dict[str, float]:
    """Pearson r between the final prediction and the first and second marked values.

    A model that saturates on long adding sequences tracks only one of them.
    """
    if "first" not in batch.aux or "second" not in batch.aux:
        raise DataError("output correlation needs an adding-task batch with marked values")
    _, outputs = as_model(model).forward(batch.inputs, per_step=False)
    prediction = outputs[:, 0]
    return {
        "first": _pearson(prediction, batch.aux["first"]),
        "second": _pearson(prediction, batch.aux["second"]),
    }
