"""
Central finite differences as an oracle for hand-written gradients.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from urnn.models.losses import task_loss

DEFAULT_STEP = 1e-6
DEFAULT_RTOL = 1e-5
DEFAULT_ATOL = 1e-8


def finite_difference(fun: Callable[[np.ndarray], float], x: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Numerical gradient of a scalar function, same shape as x"""
    x = np.array(x, dtype=float)
    flat = x.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = fun(x)
        flat[i] = orig - step
        f_minus = fun(x)
        flat[i] = orig
        grad[i] = 0.5 * (f_plus - f_minus) / step
    return grad.reshape(x.shape)


def gradient_error(
    analytic: np.ndarray, numeric: np.ndarray, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL
) -> np.ndarray:
    """Relative error with an absolute floor: entries pass when <= rtol.

    Where both partials are below atol / rtol the error is measured in units
    of atol instead, so near-zero partials only need to agree to atol.
    """
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), atol / rtol)
    return diff / scale


@dataclass(frozen=True)
class GroupCheck:
    """Finite-difference agreement for one parameter group"""

    name: str
    size: int
    max_error: float
    passed: bool


def check_model_gradients(
    model,
    batch,
    step: float = DEFAULT_STEP,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    groups: Optional[Sequence[str]] = None,
) -> List[GroupCheck]:
    """Compare model.loss_and_grads against finite differences, group by group.

    Parameters are perturbed in place and restored afterwards.
    """
    analytic = model.loss_and_grads(batch).grads
    report = []
    for name, array in model.named_arrays().items():
        if groups is not None and name not in groups:
            continue
        saved = array.copy()

        def loss_at(values: np.ndarray) -> float:
            array[...] = values
            _, outputs = model.forward(batch.inputs, batch.per_step)
            return task_loss(batch, outputs)[0]

        try:
            numeric = finite_difference(loss_at, saved, step)
        finally:
            array[...] = saved
        err = gradient_error(analytic[name], numeric, rtol, atol)
        worst = float(err.max()) if err.size else 0.0
        report.append(GroupCheck(name, int(array.size), worst, worst <= rtol))
    return report
