"""
Comparison cells: tanh RNN, IRNN (relu RNN with identity recurrence) and LSTM,
each with exact BPTT, plus global-norm gradient clipping.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from urnn.core.errors import ConsistencyError, DataError, InvalidParameterError, ShapeError
from urnn.models.base import Backward, RecurrentModel
from urnn.models.losses import task_loss
from urnn.models.params import LSTMParams, RNNParams
from urnn.tasks.batch import TaskBatch

logger = logging.getLogger(__name__)


def _as_batch(x: np.ndarray, n_in: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != n_in:
        raise ShapeError(f"inputs must be (batch, T, {n_in}), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("inputs contain non-finite values")
    return x


def _readout_grads(
    w_ho: np.ndarray, hs: np.ndarray, d_outputs: np.ndarray, per_step: bool
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of the linear readout and the per-step dL/dh it injects.

    hs holds h_0..h_T along axis 1; the returned injection has the same shape.
    """
    inject = np.zeros_like(hs)
    if per_step:
        d_w = np.einsum("bto,btk->ok", d_outputs, hs[:, 1:])
        d_b = d_outputs.sum(axis=(0, 1))
        inject[:, 1:] = d_outputs @ w_ho
    else:
        d_w = d_outputs.T @ hs[:, -1]
        d_b = d_outputs.sum(axis=0)
        inject[:, -1] = d_outputs @ w_ho
    return d_w, d_b, inject


def _check_d_outputs(d_outputs: np.ndarray, batch: int, steps: int, n_o: int, per_step: bool):
    expected = (batch, steps, n_o) if per_step else (batch, n_o)
    if d_outputs.shape != expected:
        raise ConsistencyError(f"output gradients have shape {d_outputs.shape}, tape expects {expected}")


@dataclass
class RNNTape:
    inputs: np.ndarray
    hs: np.ndarray
    per_step: bool


def rnn_forward(p: RNNParams, x: np.ndarray, per_step: bool) -> Tuple[RNNTape, np.ndarray]:
    """h_t = act(W_hh h_{t-1} + W_xh x_t + b_h), o_t = W_ho h_t + b_o"""
    x = _as_batch(x, p.dims.n_in)
    batch, steps, _ = x.shape
    n_h = p.dims.n_h
    act = np.tanh if p.activation == "tanh" else (lambda a: np.maximum(a, 0.0))

    xw = x @ p.w_xh.T + p.b_h
    hs = np.empty((batch, steps + 1, n_h))
    hs[:, 0] = p.h0
    for t in range(steps):
        hs[:, t + 1] = act(hs[:, t] @ p.w_hh.T + xw[:, t])

    outputs = (hs[:, 1:] if per_step else hs[:, -1]) @ p.w_ho.T + p.b_o
    return RNNTape(x, hs, per_step), outputs


def rnn_backward(p: RNNParams, tape: RNNTape, d_outputs: np.ndarray) -> Backward:
    batch, steps_plus_one, n_h = tape.hs.shape
    steps = steps_plus_one - 1
    if n_h != p.dims.n_h:
        raise ConsistencyError(f"tape was recorded for n_h={n_h}, parameters have n_h={p.dims.n_h}")
    _check_d_outputs(d_outputs, batch, steps, p.dims.n_o, tape.per_step)

    d_w_ho, d_b_o, inject = _readout_grads(p.w_ho, tape.hs, d_outputs, tape.per_step)
    d_w_hh = np.zeros_like(p.w_hh)
    d_pre = np.zeros((batch, steps, n_h))
    norms = np.zeros(steps)

    carry = np.zeros((batch, n_h))
    for t in range(steps, 0, -1):
        dh = carry + inject[:, t]
        norms[t - 1] = np.sqrt(np.sum(dh * dh))
        h = tape.hs[:, t]
        da = dh * (1.0 - h * h) if p.activation == "tanh" else dh * (h > 0)
        d_pre[:, t - 1] = da
        d_w_hh += da.T @ tape.hs[:, t - 1]
        carry = da @ p.w_hh
    carry = carry + inject[:, 0]

    grads = {
        "w_hh": d_w_hh,
        "w_xh": np.einsum("btn,bti->ni", d_pre, tape.inputs),
        "b_h": d_pre.sum(axis=(0, 1)),
        "h0": carry.sum(axis=0),
        "w_ho": d_w_ho,
        "b_o": d_b_o,
    }
    return Backward(grads, norms)


def rnn_forward_bptt(p: RNNParams, batch: TaskBatch) -> Tuple[float, Dict[str, np.ndarray]]:
    tape, outputs = rnn_forward(p, batch.inputs, batch.per_step)
    loss, d_outputs = task_loss(batch, outputs)
    return loss, rnn_backward(p, tape, d_outputs).grads


def _sigmoid(a: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * a))


@dataclass
class LSTMTape:
    inputs: np.ndarray
    hs: np.ndarray
    cs: np.ndarray
    gates: np.ndarray
    per_step: bool


def lstm_forward(p: LSTMParams, x: np.ndarray, per_step: bool) -> Tuple[LSTMTape, np.ndarray]:
    """Standard LSTM: sigmoid input/forget/output gates, tanh candidate and cell output"""
    x = _as_batch(x, p.dims.n_in)
    batch, steps, _ = x.shape
    n_h = p.dims.n_h
    w_h, w_x = p.w_gates[:, :n_h], p.w_gates[:, n_h:]

    xw = x @ w_x.T + p.b_gates
    hs = np.empty((batch, steps + 1, n_h))
    cs = np.empty((batch, steps + 1, n_h))
    gates = np.empty((batch, steps, 4 * n_h))
    hs[:, 0], cs[:, 0] = p.h0, p.c0
    for t in range(steps):
        a = hs[:, t] @ w_h.T + xw[:, t]
        g = np.empty_like(a)
        g[:, : 3 * n_h] = _sigmoid(a[:, : 3 * n_h])
        g[:, 3 * n_h :] = np.tanh(a[:, 3 * n_h :])
        i, f, o, cand = np.split(g, 4, axis=1)
        cs[:, t + 1] = f * cs[:, t] + i * cand
        hs[:, t + 1] = o * np.tanh(cs[:, t + 1])
        gates[:, t] = g

    outputs = (hs[:, 1:] if per_step else hs[:, -1]) @ p.w_ho.T + p.b_o
    return LSTMTape(x, hs, cs, gates, per_step), outputs


def lstm_backward(p: LSTMParams, tape: LSTMTape, d_outputs: np.ndarray) -> Backward:
    batch, steps_plus_one, n_h = tape.hs.shape
    steps = steps_plus_one - 1
    if n_h != p.dims.n_h:
        raise ConsistencyError(f"tape was recorded for n_h={n_h}, parameters have n_h={p.dims.n_h}")
    _check_d_outputs(d_outputs, batch, steps, p.dims.n_o, tape.per_step)

    d_w_ho, d_b_o, inject = _readout_grads(p.w_ho, tape.hs, d_outputs, tape.per_step)
    w_h = p.w_gates[:, :n_h]
    d_w_h = np.zeros_like(w_h)
    d_pre = np.zeros((batch, steps, 4 * n_h))
    norms = np.zeros(steps)

    dh_carry = np.zeros((batch, n_h))
    dc_carry = np.zeros((batch, n_h))
    for t in range(steps, 0, -1):
        dh = dh_carry + inject[:, t]
        norms[t - 1] = np.sqrt(np.sum(dh * dh))
        i, f, o, cand = np.split(tape.gates[:, t - 1], 4, axis=1)
        tc = np.tanh(tape.cs[:, t])

        dc = dc_carry + dh * o * (1.0 - tc * tc)
        da = np.concatenate(
            [
                dc * cand * i * (1.0 - i),
                dc * tape.cs[:, t - 1] * f * (1.0 - f),
                dh * tc * o * (1.0 - o),
                dc * i * (1.0 - cand * cand),
            ],
            axis=1,
        )
        d_pre[:, t - 1] = da
        d_w_h += da.T @ tape.hs[:, t - 1]
        dh_carry = da @ w_h
        dc_carry = dc * f
    dh_carry = dh_carry + inject[:, 0]

    grads = {
        "w_gates": np.concatenate([d_w_h, np.einsum("btg,bti->gi", d_pre, tape.inputs)], axis=1),
        "b_gates": d_pre.sum(axis=(0, 1)),
        "h0": dh_carry.sum(axis=0),
        "c0": dc_carry.sum(axis=0),
        "w_ho": d_w_ho,
        "b_o": d_b_o,
    }
    return Backward(grads, norms)


def lstm_forward_bptt(p: LSTMParams, batch: TaskBatch) -> Tuple[float, Dict[str, np.ndarray]]:
    tape, outputs = lstm_forward(p, batch.inputs, batch.per_step)
    loss, d_outputs = task_loss(batch, outputs)
    return loss, lstm_backward(p, tape, d_outputs).grads


def global_norm(grads: Dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: Dict[str, np.ndarray], threshold: float) -> Dict[str, np.ndarray]:
    """Rescale all gradients by threshold / norm when the global L2 norm exceeds threshold"""
    if threshold <= 0:
        raise InvalidParameterError(f"clip threshold must be positive, got {threshold}")
    norm = global_norm(grads)
    if norm <= threshold:
        return grads
    logger.debug("clipping gradient norm %.4g to %.4g", norm, threshold)
    scale = threshold / norm
    return {name: g * scale for name, g in grads.items()}


class RNN(RecurrentModel):
    """tanh RNN or IRNN behind the shared model interface"""

    def __init__(self, params: RNNParams):
        super().__init__(params)
        self.kind = "rnn_tanh" if params.activation == "tanh" else "irnn"

    def forward(self, inputs: np.ndarray, per_step: bool) -> Tuple[RNNTape, np.ndarray]:
        return rnn_forward(self.params, inputs, per_step)

    def backward(self, tape: RNNTape, d_outputs: np.ndarray) -> Backward:
        return rnn_backward(self.params, tape, d_outputs)

    def hidden_states(self, tape: RNNTape) -> np.ndarray:
        return tape.hs[:, 1:]


class LSTM(RecurrentModel):
    kind = "lstm"

    def forward(self, inputs: np.ndarray, per_step: bool) -> Tuple[LSTMTape, np.ndarray]:
        return lstm_forward(self.params, inputs, per_step)

    def backward(self, tape: LSTMTape, d_outputs: np.ndarray) -> Backward:
        return lstm_backward(self.params, tape, d_outputs)

    def hidden_states(self, tape: LSTMTape) -> np.ndarray:
        return tape.hs[:, 1:]
