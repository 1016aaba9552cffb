"""
Copy-memory and adding problems with their memoryless baselines.

All generators are pure functions of (dims, seed).
"""

from dataclasses import dataclass

import numpy as np

from urnn.core.errors import InvalidParameterError
from urnn.tasks.batch import TaskBatch

COPY_LENGTH = 10
COPY_CONTENT = 8
BLANK = 8
DELIMITER = 9
COPY_INPUT_CLASSES = 10
COPY_OUTPUT_CLASSES = 9

TRAIN_STREAM = 0
EVAL_STREAM = 1
PROBE_STREAM = 2


def batch_seed(seed: int, stream: int, index: int) -> int:
    """Per-batch seed from (run seed, stream, batch index)"""
    return int(np.random.SeedSequence([seed, stream, index]).generate_state(1)[0])


@dataclass(frozen=True)
class CopyBatch:
    """Copy-memory sequences of length T + 20 (categories 0..9)"""

    inputs: np.ndarray
    targets: np.ndarray

    @property
    def T(self) -> int:
        return self.inputs.shape[1] - 2 * COPY_LENGTH

    def to_task_batch(self) -> TaskBatch:
        """One-hot inputs over the 10 categories, 9 output classes"""
        onehot = np.eye(COPY_INPUT_CLASSES)[self.inputs]
        return TaskBatch(onehot, self.targets, "copy", n_classes=COPY_OUTPUT_CLASSES)


@dataclass(frozen=True)
class AddingBatch:
    values: np.ndarray
    markers: np.ndarray
    targets: np.ndarray

    def to_task_batch(self) -> TaskBatch:
        """Per-step inputs (value, marker)"""
        inputs = np.stack([self.values, self.markers.astype(float)], axis=-1)
        first = np.argmax(self.markers, axis=1)
        second = self.markers.shape[1] - 1 - np.argmax(self.markers[:, ::-1], axis=1)
        rows = np.arange(self.values.shape[0])
        aux = {"first": self.values[rows, first], "second": self.values[rows, second]}
        return TaskBatch(inputs, self.targets, "regression", aux=aux)


def gen_copy_batch(T: int, batch: int, seed: int) -> CopyBatch:
    """10 symbols from 0..7, T - 1 blanks, a delimiter, then 10 blanks.

    Targets are blank for the first T + 10 steps and then repeat the 10
    symbols in order.
    """
    if T < 1 or batch < 1:
        raise InvalidParameterError(f"copy task needs T >= 1 and batch >= 1, got T={T}, batch={batch}")
    rng = np.random.default_rng(seed)
    length = T + 2 * COPY_LENGTH
    head = rng.integers(0, COPY_CONTENT, size=(batch, COPY_LENGTH))

    inputs = np.full((batch, length), BLANK, dtype=np.int64)
    inputs[:, :COPY_LENGTH] = head
    inputs[:, T + COPY_LENGTH - 1] = DELIMITER

    targets = np.full((batch, length), BLANK, dtype=np.int64)
    targets[:, -COPY_LENGTH:] = head
    return CopyBatch(inputs, targets)


def copy_baseline_ce(T: int) -> float:
    """Memoryless cross entropy 10 ln 8 / (T + 20), in nats"""
    if T < 1:
        raise InvalidParameterError(f"T must be >= 1, got {T}")
    return COPY_LENGTH * np.log(COPY_CONTENT) / (T + 2 * COPY_LENGTH)


def gen_adding_batch(T: int, batch: int, seed: int) -> AddingBatch:
    """U[0,1] values with one marker in each half; target is the marked sum"""
    if T < 2:
        raise InvalidParameterError(f"adding task needs T >= 2, got {T}")
    if batch < 1:
        raise InvalidParameterError(f"batch must be >= 1, got {batch}")
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.0, 1.0, size=(batch, T))
    # for odd T the middle index belongs to neither half
    first = rng.integers(0, T // 2, size=batch)
    second = rng.integers((T + 1) // 2, T, size=batch)

    rows = np.arange(batch)
    markers = np.zeros((batch, T), dtype=np.int8)
    markers[rows, first] = 1
    markers[rows, second] = 1
    targets = values[rows, first] + values[rows, second]
    return AddingBatch(values, markers, targets)


def adding_baseline_mse() -> float:
    """Variance of the sum of two independent U[0,1]: the MSE of always predicting 1"""
    return 1.0 / 6.0
