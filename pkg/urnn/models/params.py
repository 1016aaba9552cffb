from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict

import numpy as np

from urnn.core.complex_ops import ComplexMatrix, ComplexVector
from urnn.core.errors import ConsistencyError, ShapeError
from urnn.core.unitary import UnitaryComposition

ACTIVATIONS = ("modrelu", "identity")


@dataclass(frozen=True)
class ModelDims:
    """Input, hidden and output sizes of a recurrent model"""

    n_in: int
    n_h: int
    n_o: int


class ParamGroups(ABC):
    """Base for containers that expose their learnable arrays by name"""

    @abstractmethod
    def named_arrays(self) -> Dict[str, np.ndarray]:
        """Learnable arrays keyed by group name, as views into the container"""

    def n_params(self) -> int:
        return int(sum(a.size for a in self.named_arrays().values()))

    def load_arrays(self, groups: Dict[str, np.ndarray]):
        """Copy arrays into this container in place; names and shapes must match"""
        own = self.named_arrays()
        missing = sorted(set(own) - set(groups))
        if missing:
            raise ConsistencyError(f"missing parameter groups: {', '.join(missing)}")
        for name, target in own.items():
            source = np.asarray(groups[name])
            if source.shape != target.shape:
                raise ConsistencyError(
                    f"parameter group '{name}' has shape {source.shape}, model expects {target.shape}"
                )
            target[...] = source


@dataclass(frozen=True)
class URNNParams(ParamGroups):
    """All learnable quantities of a unitary-evolution RNN"""

    v_in: ComplexMatrix
    w: UnitaryComposition
    b: np.ndarray
    u_out: np.ndarray
    b_o: np.ndarray
    h0: ComplexVector
    activation: str = "modrelu"

    def __post_init__(self):
        n_h = self.w.n
        if self.v_in.n_out != n_h or self.b.shape != (n_h,) or self.h0.shape != (n_h,):
            raise ShapeError(f"input map, biases and h0 must all use n_h={n_h}")
        if self.u_out.ndim != 2 or self.u_out.shape[1] != 2 * n_h:
            raise ShapeError(f"u_out must be n_o x {2 * n_h}, got {self.u_out.shape}")
        if self.b_o.shape != (self.u_out.shape[0],):
            raise ShapeError(f"b_o must have length {self.u_out.shape[0]}, got {self.b_o.shape}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation '{self.activation}'")

    @property
    def dims(self) -> ModelDims:
        return ModelDims(self.v_in.n_in, self.w.n, self.u_out.shape[0])

    def named_arrays(self) -> Dict[str, np.ndarray]:
        groups = {"v_in.re": self.v_in.a, "v_in.im": self.v_in.b}
        groups.update({f"w.{k}": v for k, v in self.w.named_arrays().items()})
        groups.update(
            {
                "b": self.b,
                "u_out": self.u_out,
                "b_o": self.b_o,
                "h0.re": self.h0.re,
                "h0.im": self.h0.im,
            }
        )
        return groups


@dataclass(frozen=True)
class RNNParams(ParamGroups):
    """Real-valued Elman RNN (tanh) or IRNN (relu) with a linear readout"""

    w_hh: np.ndarray
    w_xh: np.ndarray
    b_h: np.ndarray
    h0: np.ndarray
    w_ho: np.ndarray
    b_o: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        n_h = self.w_hh.shape[0]
        if (
            self.w_hh.shape != (n_h, n_h)
            or self.w_xh.shape[0] != n_h
            or self.b_h.shape != (n_h,)
            or self.h0.shape != (n_h,)
            or self.w_ho.shape[1] != n_h
            or self.b_o.shape != (self.w_ho.shape[0],)
        ):
            raise ShapeError("inconsistent RNN parameter shapes")
        if self.activation not in ("tanh", "relu"):
            raise ShapeError(f"unknown activation '{self.activation}'")

    @property
    def dims(self) -> ModelDims:
        return ModelDims(self.w_xh.shape[1], self.w_hh.shape[0], self.w_ho.shape[0])

    def named_arrays(self) -> Dict[str, np.ndarray]:
        return {
            "w_hh": self.w_hh,
            "w_xh": self.w_xh,
            "b_h": self.b_h,
            "h0": self.h0,
            "w_ho": self.w_ho,
            "b_o": self.b_o,
        }


@dataclass(frozen=True)
class LSTMParams(ParamGroups):
    """LSTM without peepholes; gate rows stacked as input, forget, output, candidate"""

    w_gates: np.ndarray
    b_gates: np.ndarray
    h0: np.ndarray
    c0: np.ndarray
    w_ho: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        n_h = self.h0.shape[0]
        if (
            self.w_gates.ndim != 2
            or self.w_gates.shape[0] != 4 * n_h
            or self.w_gates.shape[1] <= n_h
            or self.b_gates.shape != (4 * n_h,)
            or self.c0.shape != (n_h,)
            or self.w_ho.shape[1] != n_h
            or self.b_o.shape != (self.w_ho.shape[0],)
        ):
            raise ShapeError("inconsistent LSTM parameter shapes")

    @property
    def dims(self) -> ModelDims:
        n_h = self.h0.shape[0]
        return ModelDims(self.w_gates.shape[1] - n_h, n_h, self.w_ho.shape[0])

    def named_arrays(self) -> Dict[str, np.ndarray]:
        return {
            "w_gates": self.w_gates,
            "b_gates": self.b_gates,
            "h0": self.h0,
            "c0": self.c0,
            "w_ho": self.w_ho,
            "b_o": self.b_o,
        }


def urnn_param_count(dims: ModelDims) -> int:
    """2 n_h n_in + 7 n_h (blocks) + n_h + 2 n_h n_o + n_o + 2 n_h"""
    n_in, n_h, n_o = dims.n_in, dims.n_h, dims.n_o
    return 2 * n_h * n_in + 7 * n_h + n_h + 2 * n_h * n_o + n_o + 2 * n_h
