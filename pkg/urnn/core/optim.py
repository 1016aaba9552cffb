"""
RMSProp and parameter initialization for every model family.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from urnn.core.complex_ops import ComplexMatrix, ComplexVector
from urnn.core.errors import InvalidParameterError, NonFiniteError, ShapeError
from urnn.core.unitary import DiagonalPhase, FixedPermutation, Reflection, UnitaryComposition
from urnn.models.params import LSTMParams, ModelDims, RNNParams, URNNParams

logger = logging.getLogger(__name__)

DEFAULT_LR = 1e-3
DEFAULT_DECAY = 0.9
DEFAULT_EPS = 1e-8


@dataclass
class RMSPropState:
    """Running mean of squared gradients per parameter group"""

    lr: float = DEFAULT_LR
    decay: float = DEFAULT_DECAY
    eps: float = DEFAULT_EPS
    accum: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.decay < 1.0:
            raise InvalidParameterError(f"decay must lie in [0, 1), got {self.decay}")
        if self.lr <= 0 or self.eps <= 0:
            raise InvalidParameterError("lr and eps must be positive")

    def describe(self) -> str:
        return f"rmsprop(lr={self.lr:g}, decay={self.decay:g}, eps={self.eps:g}, accum=decay*accum+(1-decay)*g^2)"


def rmsprop_update(
    state: RMSPropState, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]
) -> Tuple[Dict[str, np.ndarray], RMSPropState]:
    """One RMSProp step, applied in place to the arrays in params.

    accum <- decay * accum + (1 - decay) * g^2
    param <- param - lr * g / (sqrt(accum) + eps)
    """
    for name, g in grads.items():
        if name not in params:
            raise ShapeError(f"gradient for unknown parameter group '{name}'")
        if g.shape != params[name].shape:
            raise ShapeError(f"gradient '{name}' has shape {g.shape}, parameter has {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient in parameter group '{name}'")

    for name, g in grads.items():
        acc = state.accum.get(name)
        if acc is None:
            acc = state.accum[name] = np.zeros_like(g)
        elif acc.shape != g.shape:
            raise ShapeError(f"accumulator '{name}' has shape {acc.shape}, gradient has {g.shape}")
        acc *= state.decay
        acc += (1.0 - state.decay) * g * g
        params[name] -= state.lr * g / (np.sqrt(acc) + state.eps)
    return params, state


def glorot_uniform(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


def _check_dims(dims: ModelDims):
    if min(dims.n_in, dims.n_h, dims.n_o) < 1:
        raise InvalidParameterError(f"all dimensions must be positive, got {dims}")


def init_urnn(dims: ModelDims, seed: int, activation: str = "modrelu") -> URNNParams:
    """Initialize a uRNN.

    V and U are Glorot uniform (V's real and imaginary parts drawn
    independently with fans n_in and n_h); b and b_o start at zero so the
    network is linear with unitary weights; reflection vectors are U[-1, 1]
    coordinate-wise; phases are U[-pi, pi]; h0 is U[-sqrt(3/(2n_h)),
    sqrt(3/(2n_h))] per coordinate, which gives E|h0|^2 = 1.
    """
    _check_dims(dims)
    n_in, n_h, n_o = dims.n_in, dims.n_h, dims.n_o
    if n_h & (n_h - 1):
        raise InvalidParameterError(f"n_h must be a power of two, got {n_h}")
    rng = np.random.default_rng(seed)

    v_in = ComplexMatrix(glorot_uniform(rng, n_h, n_in), glorot_uniform(rng, n_h, n_in))
    d1, d2, d3 = (DiagonalPhase(rng.uniform(-np.pi, np.pi, n_h)) for _ in range(3))
    r1, r2 = (
        Reflection(ComplexVector(rng.uniform(-1, 1, n_h), rng.uniform(-1, 1, n_h))) for _ in range(2)
    )
    perm = FixedPermutation.from_seed(n_h, int(rng.integers(2**32)))
    u_out = glorot_uniform(rng, n_o, 2 * n_h)
    bound = np.sqrt(3.0 / (2 * n_h))
    h0 = ComplexVector(rng.uniform(-bound, bound, n_h), rng.uniform(-bound, bound, n_h))

    params = URNNParams(
        v_in=v_in,
        w=UnitaryComposition(d1=d1, d2=d2, d3=d3, r1=r1, r2=r2, perm=perm),
        b=np.zeros(n_h),
        u_out=u_out,
        b_o=np.zeros(n_o),
        h0=h0,
        activation=activation,
    )
    logger.debug("initialized uRNN %s with %d parameters (seed %d)", dims, params.n_params(), seed)
    return params


TANH_SPECTRAL_RADIUS = 0.9


def spectral_radius(w: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(w))))


def init_rnn(dims: ModelDims, seed: int, activation: str = "tanh") -> RNNParams:
    """tanh RNN or IRNN (relu).

    The tanh recurrence is a Glorot draw rescaled to spectral radius
    TANH_SPECTRAL_RADIUS, so back-propagated gradients contract by at least
    that factor per step. The IRNN recurrence is the identity.
    """
    _check_dims(dims)
    rng = np.random.default_rng(seed)
    n_in, n_h, n_o = dims.n_in, dims.n_h, dims.n_o
    if activation == "relu":
        w_hh = np.eye(n_h)
    else:
        w_hh = glorot_uniform(rng, n_h, n_h)
        w_hh *= TANH_SPECTRAL_RADIUS / spectral_radius(w_hh)
    return RNNParams(
        w_hh=w_hh,
        w_xh=glorot_uniform(rng, n_h, n_in),
        b_h=np.zeros(n_h),
        h0=np.zeros(n_h),
        w_ho=glorot_uniform(rng, n_o, n_h),
        b_o=np.zeros(n_o),
        activation=activation,
    )


def init_lstm(dims: ModelDims, seed: int, forget_bias: float = 1.0) -> LSTMParams:
    _check_dims(dims)
    rng = np.random.default_rng(seed)
    n_in, n_h, n_o = dims.n_in, dims.n_h, dims.n_o
    w_gates = np.concatenate([glorot_uniform(rng, n_h, n_h + n_in) for _ in range(4)])
    b_gates = np.zeros(4 * n_h)
    b_gates[n_h : 2 * n_h] = forget_bias
    return LSTMParams(
        w_gates=w_gates,
        b_gates=b_gates,
        h0=np.zeros(n_h),
        c0=np.zeros(n_h),
        w_ho=glorot_uniform(rng, n_o, n_h),
        b_o=np.zeros(n_o),
    )
