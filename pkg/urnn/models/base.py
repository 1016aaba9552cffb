from abc import ABC, abstractmethod
from typing import Any, Dict, NamedTuple, Tuple

import numpy as np

from urnn.models.losses import task_loss, task_metric
from urnn.models.params import ModelDims, ParamGroups
from urnn.tasks.batch import TaskBatch


class Backward(NamedTuple):
    """Parameter gradients and |dC/dh_t| for t = 1..T"""

    grads: Dict[str, np.ndarray]
    hidden_grad_norms: np.ndarray


class StepResult(NamedTuple):
    loss: float
    grads: Dict[str, np.ndarray]
    outputs: np.ndarray
    hidden_grad_norms: np.ndarray


class RecurrentModel(ABC):
    """Common surface of the uRNN and the baseline cells"""

    kind = "recurrent"

    def __init__(self, params: ParamGroups):
        self.params = params

    @property
    def dims(self) -> ModelDims:
        return self.params.dims

    def named_arrays(self) -> Dict[str, np.ndarray]:
        return self.params.named_arrays()

    def fixed_arrays(self) -> Dict[str, np.ndarray]:
        """Non-learnable state that still belongs in a checkpoint"""
        return {}

    def n_params(self) -> int:
        return self.params.n_params()

    @abstractmethod
    def forward(self, inputs: np.ndarray, per_step: bool) -> Tuple[Any, np.ndarray]:
        """Run the recurrence; returns (tape, outputs)"""

    @abstractmethod
    def backward(self, tape: Any, d_outputs: np.ndarray) -> Backward:
        """BPTT from output cotangents shaped like the forward outputs"""

    @abstractmethod
    def hidden_states(self, tape: Any) -> np.ndarray:
        """Real representation of h_1..h_T, shape (batch, T, dim)"""

    def loss_and_grads(self, batch: TaskBatch) -> StepResult:
        tape, outputs = self.forward(batch.inputs, batch.per_step)
        loss, d_outputs = task_loss(batch, outputs)
        grads, norms = self.backward(tape, d_outputs)
        return StepResult(loss, grads, outputs, norms)

    def evaluate(self, batch: TaskBatch) -> Tuple[float, float]:
        """(loss, metric) on a batch without computing gradients"""
        _, outputs = self.forward(batch.inputs, batch.per_step)
        loss, _ = task_loss(batch, outputs)
        return loss, task_metric(batch, outputs)
