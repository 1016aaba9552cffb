from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from urnn.core.errors import ShapeError

OBJECTIVES = ("copy", "regression", "classification")


@dataclass(frozen=True)
class TaskBatch:
    """Model-ready batch: real inputs (batch, T, n_in) plus targets.

    objective selects the loss: "copy" is per-step cross entropy over every
    step, "regression" is squared error on the final output and
    "classification" is cross entropy on the final output.
    """

    inputs: np.ndarray
    targets: np.ndarray
    objective: str
    n_classes: int = 0
    aux: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ShapeError(f"unknown objective '{self.objective}'")
        if self.inputs.ndim != 3:
            raise ShapeError(f"inputs must be (batch, T, n_in), got {self.inputs.shape}")
        if self.targets.shape[0] != self.inputs.shape[0]:
            raise ShapeError("inputs and targets disagree on batch size")

    @property
    def per_step(self) -> bool:
        return self.objective == "copy"

    @property
    def batch_size(self) -> int:
        return self.inputs.shape[0]

    @property
    def T(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_in(self) -> int:
        return self.inputs.shape[2]
