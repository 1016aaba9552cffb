"""
Batch streams feeding the training loop.

Synthetic tasks draw a fresh batch per index from a seed stream (training,
evaluation and probe streams never overlap). MNIST walks shuffled epochs of
the training images and evaluates on the test images.
"""

import logging
from typing import Dict, List, Optional

import numpy as np

from urnn.config import RunConfig
from urnn.core.errors import ConfigError
from urnn.tasks.batch import TaskBatch
from urnn.tasks.mnist import MnistSet, load_mnist_dir, mnist_task_batch, permute_pixels
from urnn.tasks.synthetic import (
    EVAL_STREAM,
    PROBE_STREAM,
    TRAIN_STREAM,
    batch_seed,
    gen_adding_batch,
    gen_copy_batch,
)

logger = logging.getLogger(__name__)


class SyntheticSource:
    """Copy or adding batches generated on demand"""

    def __init__(self, task: str, T: int, batch: int, eval_batch: int, seed: int):
        if task not in ("copy", "adding"):
            raise ConfigError(f"no synthetic generator for task '{task}'")
        self.task = task
        self.T = T
        self.batch = batch
        self.eval_size = eval_batch
        self.seed = seed

    def _generate(self, T: int, size: int, seed: int) -> TaskBatch:
        generator = gen_copy_batch if self.task == "copy" else gen_adding_batch
        return generator(T, size, seed).to_task_batch()

    def train_batch(self, index: int) -> TaskBatch:
        return self._generate(self.T, self.batch, batch_seed(self.seed, TRAIN_STREAM, index))

    def eval_batches(self, index: int) -> List[TaskBatch]:
        return [self._generate(self.T, self.eval_size, batch_seed(self.seed, EVAL_STREAM, index))]

    def probe_batch(self, T: Optional[int] = None, size: Optional[int] = None) -> TaskBatch:
        return self._generate(T or self.T, size or self.eval_size, batch_seed(self.seed, PROBE_STREAM, 0))


class MnistSource:
    """Pixel-by-pixel MNIST: shuffled training epochs, chunked test evaluation"""

    def __init__(self, train: MnistSet, test: MnistSet, batch: int, eval_batch: int, seed: int):
        if len(train) == 0 or len(test) == 0:
            raise ConfigError("MNIST training and test sets must be non-empty")
        self.train = train
        self.test = test
        self.batch = min(batch, len(train))
        self.eval_size = eval_batch
        self.seed = seed
        self.T = train.rows * train.cols
        self._orders: Dict[int, np.ndarray] = {}

    def _epoch_order(self, epoch: int) -> np.ndarray:
        order = self._orders.get(epoch)
        if order is None:
            rng = np.random.default_rng(batch_seed(self.seed, TRAIN_STREAM, epoch))
            order = rng.permutation(len(self.train))
            # only the current epoch is kept
            self._orders = {epoch: order}
            logger.debug("starting MNIST epoch %d", epoch)
        return order

    def train_batch(self, index: int) -> TaskBatch:
        per_epoch = len(self.train) // self.batch
        epoch, k = divmod(index, per_epoch)
        idx = self._epoch_order(epoch)[k * self.batch : (k + 1) * self.batch]
        return mnist_task_batch(self.train, idx)

    def eval_batches(self, index: int) -> List[TaskBatch]:
        n = len(self.test)
        return [
            mnist_task_batch(self.test, np.arange(start, min(start + self.eval_size, n)))
            for start in range(0, n, self.eval_size)
        ]

    def probe_batch(self, T: Optional[int] = None, size: Optional[int] = None) -> TaskBatch:
        count = min(size or self.eval_size, len(self.test))
        return mnist_task_batch(self.test, np.arange(count))


def make_source(cfg: RunConfig):
    if cfg.task in ("copy", "adding"):
        return SyntheticSource(cfg.task, cfg.T, cfg.batch, cfg.eval_batch, cfg.seed)

    train = load_mnist_dir(cfg.mnist_dir, train=True)
    test = load_mnist_dir(cfg.mnist_dir, train=False)
    if cfg.train_subset:
        train = train.subset(cfg.train_subset)
    if cfg.test_subset:
        test = test.subset(cfg.test_subset)
    if cfg.task == "mnist_permuted":
        # one permutation for the whole run, shared by train and test
        train = permute_pixels(train, cfg.seed)
        test = permute_pixels(test, cfg.seed)
    return MnistSource(train, test, cfg.batch, cfg.eval_batch, cfg.seed)
