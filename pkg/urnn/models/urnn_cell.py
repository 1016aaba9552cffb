"""
The unitary-evolution RNN: complex input map, unitary recurrence, modReLU
and a real linear readout, with exact backpropagation through time.

    z_t = W h_{t-1} + V x_t
    h_t = modrelu(z_t, b)
    o_t = U [Re h_t; Im h_t] + b_o
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from urnn.core.complex_ops import ComplexVector
from urnn.core.errors import ConsistencyError, DataError, ShapeError
from urnn.core.unitary import composition_forward, composition_vjp
from urnn.models.base import Backward, RecurrentModel
from urnn.models.params import URNNParams

logger = logging.getLogger(__name__)

MODRELU_EPS = 1e-5


def _modulus(z: ComplexVector) -> np.ndarray:
    return np.sqrt(z.re * z.re + z.im * z.im)


def modrelu(z: ComplexVector, b: np.ndarray, eps: float = MODRELU_EPS) -> ComplexVector:
    """z * max(|z| + b, 0) / (|z| + eps): rescales the modulus, keeps the phase"""
    if z.n != np.shape(b)[-1]:
        raise ShapeError(f"bias length {np.shape(b)[-1]} does not match z length {z.n}")
    m = _modulus(z)
    scale = np.maximum(m + b, 0.0) / (m + eps)
    return ComplexVector(z.re * scale, z.im * scale)


def modrelu_vjp(
    z: ComplexVector, b: np.ndarray, g: ComplexVector, eps: float = MODRELU_EPS
) -> Tuple[ComplexVector, np.ndarray]:
    """Cotangents of z and b (b summed over batch axes); zero on dead units.

    At |z| + b = 0 the active-side derivative is used.
    """
    if z.n != np.shape(b)[-1] or z.shape != g.shape:
        raise ShapeError("z, b and g must share the hidden dimension")
    m = _modulus(z)
    active = (m + b) >= 0.0
    denom = m + eps
    scale = np.where(active, (m + b) / denom, 0.0)
    dscale_dm = np.where(active, (eps - b) / (denom * denom), 0.0)

    proj = g.re * z.re + g.im * z.im
    # d|z|/dz = z/|z|, taken as 0 at the origin
    inv_m = np.divide(1.0, m, out=np.zeros_like(m), where=m > 0)
    coeff = proj * dscale_dm * inv_m
    grad_z = ComplexVector(g.re * scale + coeff * z.re, g.im * scale + coeff * z.im)
    grad_b = np.where(active, proj / denom, 0.0)
    return grad_z, grad_b.reshape(-1, z.n).sum(axis=0)


@dataclass
class SequenceTape:
    """Forward-pass record needed by bptt.

    hs holds h_0..h_T (T + 1 states), zs and stages hold the T
    pre-activations and per-step traces of W from composition_forward.
    """

    inputs: np.ndarray
    hs: List[ComplexVector]
    zs: List[ComplexVector]
    stages: List[List[ComplexVector]]
    per_step: bool
    n_h: int

    def __len__(self) -> int:
        return len(self.zs)


def _as_batch(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ShapeError(f"inputs must be (batch, T, n_in), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("inputs contain non-finite values")
    return x


def _readout(p: URNNParams, h: np.ndarray) -> np.ndarray:
    return h @ p.u_out.T + p.b_o


def forward_sequence(p: URNNParams, x: np.ndarray, per_step: bool) -> Tuple[SequenceTape, np.ndarray]:
    """Run the recurrence from h0.

    Returns the tape and either per-step outputs (batch, T, n_o) or the
    final-step output (batch, n_o). With T = 0 the final output is read from h0.
    """
    x = _as_batch(x)
    batch, steps, n_in = x.shape
    dims = p.dims
    if n_in != dims.n_in:
        raise ShapeError(f"model expects n_in={dims.n_in}, inputs have {n_in}")

    # V x_t for every step at once; x is real so Im(x) contributes nothing
    vx_re = x @ p.v_in.a.T
    vx_im = x @ p.v_in.b.T

    h = ComplexVector(
        np.broadcast_to(p.h0.re, (batch, dims.n_h)).copy(),
        np.broadcast_to(p.h0.im, (batch, dims.n_h)).copy(),
    )
    hs, zs, stages = [h], [], []
    for t in range(steps):
        wh, cache = composition_forward(p.w, h)
        z = ComplexVector(wh.re + vx_re[:, t], wh.im + vx_im[:, t])
        h = modrelu(z, p.b) if p.activation == "modrelu" else z
        zs.append(z)
        stages.append(cache)
        hs.append(h)

    tape = SequenceTape(x, hs, zs, stages, per_step, dims.n_h)
    if per_step:
        stacked = np.stack([hh.stacked() for hh in hs[1:]], axis=1) if steps else np.zeros((batch, 0, 2 * dims.n_h))
        return tape, _readout(p, stacked)
    return tape, _readout(p, hs[-1].stacked())


def bptt(p: URNNParams, tape: SequenceTape, loss_grads: np.ndarray) -> Backward:
    """Exact gradients of the loss with respect to every field of URNNParams.

    loss_grads has the shape of the forward outputs. The returned norms are
    |dC/dh_t| for t = 1..T over the whole batch.
    """
    dims = p.dims
    n_h = dims.n_h
    steps = len(tape)
    batch = tape.inputs.shape[0]
    if tape.n_h != n_h or len(tape.hs) != steps + 1:
        raise ConsistencyError(f"tape was recorded for n_h={tape.n_h}, parameters have n_h={n_h}")
    expected = (batch, steps, dims.n_o) if tape.per_step else (batch, dims.n_o)
    if loss_grads.shape != expected:
        raise ConsistencyError(f"output gradients have shape {loss_grads.shape}, tape expects {expected}")

    grads: Dict[str, np.ndarray] = {name: np.zeros_like(a) for name, a in p.named_arrays().items()}
    carry = ComplexVector.zeros((batch, n_h))
    if tape.per_step:
        if steps:
            hstack = np.stack([hh.stacked() for hh in tape.hs[1:]], axis=1)
            grads["u_out"] = np.einsum("bto,btk->ok", loss_grads, hstack)
            grads["b_o"] = loss_grads.sum(axis=(0, 1))
        dh_out = loss_grads @ p.u_out
    else:
        grads["u_out"] = loss_grads.T @ tape.hs[-1].stacked()
        grads["b_o"] = loss_grads.sum(axis=0)
        dh_final = loss_grads @ p.u_out
        carry = ComplexVector(dh_final[:, :n_h], dh_final[:, n_h:])

    norms = np.zeros(steps)
    gz_re = np.zeros((batch, steps, n_h))
    gz_im = np.zeros((batch, steps, n_h))
    for t in range(steps, 0, -1):
        dh = carry
        if tape.per_step:
            dh = ComplexVector(dh.re + dh_out[:, t - 1, :n_h], dh.im + dh_out[:, t - 1, n_h:])
        norms[t - 1] = np.sqrt(np.sum(dh.re * dh.re) + np.sum(dh.im * dh.im))

        if p.activation == "modrelu":
            gz, gb = modrelu_vjp(tape.zs[t - 1], p.b, dh)
            grads["b"] += gb
        else:
            gz = dh
        gz_re[:, t - 1] = gz.re
        gz_im[:, t - 1] = gz.im

        carry, wgrads = composition_vjp(p.w, tape.hs[t - 1], gz, tape.stages[t - 1])
        for name, g in wgrads.items():
            grads[f"w.{name}"] += g

    grads["v_in.re"] = np.einsum("btn,bti->ni", gz_re, tape.inputs)
    grads["v_in.im"] = np.einsum("btn,bti->ni", gz_im, tape.inputs)
    grads["h0.re"] = carry.re.sum(axis=0)
    grads["h0.im"] = carry.im.sum(axis=0)
    return Backward(grads, norms)


class URNN(RecurrentModel):
    """Unitary-evolution RNN behind the shared model interface"""

    kind = "urnn"

    def forward(self, inputs: np.ndarray, per_step: bool) -> Tuple[SequenceTape, np.ndarray]:
        return forward_sequence(self.params, inputs, per_step)

    def backward(self, tape: SequenceTape, d_outputs: np.ndarray) -> Backward:
        return bptt(self.params, tape, d_outputs)

    def hidden_states(self, tape: SequenceTape) -> np.ndarray:
        if not len(tape):
            return np.zeros((tape.inputs.shape[0], 0, 2 * tape.n_h))
        return np.stack([h.stacked() for h in tape.hs[1:]], axis=1)

    def fixed_arrays(self) -> Dict[str, np.ndarray]:
        return {"w.perm": self.params.w.perm.indices}
