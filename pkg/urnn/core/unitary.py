"""
Structured unitary operators and their vector-Jacobian products.

The hidden-to-hidden map is the composition

    W = D3 R2 F^-1 D2 P R1 F D1

of diagonal phase blocks D, complex reflections R, a fixed permutation P and
the unitary Fourier pair F / F^-1. Every block costs O(n) memory and at most
O(n log n) time.

Cotangents follow one convention throughout: for a real loss L and complex
output y, the cotangent g carries g.re = dL/dRe(y) and g.im = dL/dIm(y).
Under that convention the input cotangent of a complex-linear block M is
M* g.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from urnn.core.complex_ops import (
    ComplexMatrix,
    ComplexVector,
    cdot,
    cnorm,
    fft_unitary,
    ifft_unitary,
)
from urnn.core.errors import InvalidParameterError, ShapeError, SizeGuardError

logger = logging.getLogger(__name__)

MATERIALIZE_LIMIT = 64

# Application order, rightmost factor first.
STAGES = ("d1", "fft", "r1", "perm", "d2", "ifft", "r2", "d3")


@dataclass(frozen=True)
class DiagonalPhase:
    """Diagonal block with entries e^{i w_j}"""

    w: np.ndarray

    @property
    def n(self) -> int:
        return int(self.w.shape[-1])


@dataclass(frozen=True)
class Reflection:
    """Complex Householder reflection I - 2 v v* / |v|^2"""

    v: ComplexVector

    @property
    def n(self) -> int:
        return self.v.n


@dataclass(frozen=True)
class FixedPermutation:
    """Index permutation drawn once from a seed and never trained"""

    indices: np.ndarray
    seed: int

    def __post_init__(self):
        n = len(self.indices)
        if not np.array_equal(np.sort(self.indices), np.arange(n)):
            raise InvalidParameterError("indices must be a permutation of 0..n-1")

    @classmethod
    def from_seed(cls, n: int, seed: int) -> "FixedPermutation":
        # Generator.permutation is a seeded Fisher-Yates shuffle.
        rng = np.random.default_rng(seed)
        return cls(rng.permutation(n).astype(np.intp), int(seed))

    @classmethod
    def identity(cls, n: int) -> "FixedPermutation":
        return cls(np.arange(n, dtype=np.intp), 0)

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def inverse(self) -> np.ndarray:
        return np.argsort(self.indices)


@dataclass(frozen=True)
class UnitaryComposition:
    """W = D3 R2 F^-1 D2 P R1 F D1 with its learnable blocks"""

    d1: DiagonalPhase
    d2: DiagonalPhase
    d3: DiagonalPhase
    r1: Reflection
    r2: Reflection
    perm: FixedPermutation

    def __post_init__(self):
        sizes = {self.d1.n, self.d2.n, self.d3.n, self.r1.n, self.r2.n, self.perm.n}
        if len(sizes) != 1:
            raise ShapeError(f"all blocks must share one dimension, got sizes {sorted(sizes)}")
        n = sizes.pop()
        if n & (n - 1):
            raise ShapeError(f"composition dimension must be a power of two, got {n}")

    @property
    def n(self) -> int:
        return self.d1.n

    def named_arrays(self) -> Dict[str, np.ndarray]:
        """Learnable arrays by name (the arrays themselves, not copies)"""
        return {
            "d1": self.d1.w,
            "d2": self.d2.w,
            "d3": self.d3.w,
            "r1.re": self.r1.v.re,
            "r1.im": self.r1.v.im,
            "r2.re": self.r2.v.re,
            "r2.im": self.r2.v.im,
        }


def _check_len(n: int, x: ComplexVector):
    if x.n != n:
        raise ShapeError(f"operator has dimension {n}, vector has length {x.n}")


def apply_diag(d: DiagonalPhase, x: ComplexVector) -> ComplexVector:
    _check_len(d.n, x)
    c, s = np.cos(d.w), np.sin(d.w)
    return ComplexVector(c * x.re - s * x.im, s * x.re + c * x.im)


def apply_diag_adjoint(d: DiagonalPhase, g: ComplexVector) -> ComplexVector:
    _check_len(d.n, g)
    c, s = np.cos(d.w), np.sin(d.w)
    return ComplexVector(c * g.re + s * g.im, c * g.im - s * g.re)


def diag_param_grad(
    d: DiagonalPhase, x: ComplexVector, g: ComplexVector, y: Optional[ComplexVector] = None
) -> np.ndarray:
    """dL/dw for y = D x, summed over batch axes. Pass y when already computed."""
    if y is None:
        y = apply_diag(d, x)
    # dy/dw_j = i y_j
    grad = g.im * y.re - g.re * y.im
    return grad.reshape(-1, d.n).sum(axis=0)


def _reflection_terms(r: Reflection, x: ComplexVector):
    nu = float(np.sum(r.v.re * r.v.re + r.v.im * r.v.im))
    if nu == 0.0:
        raise InvalidParameterError("reflection vector must be nonzero")
    s_re, s_im = cdot(r.v, x)
    return nu, s_re[..., None], s_im[..., None]


def apply_reflection(r: Reflection, x: ComplexVector) -> ComplexVector:
    _check_len(r.n, x)
    nu, s_re, s_im = _reflection_terms(r, x)
    k = 2.0 / nu
    v = r.v
    return ComplexVector(
        x.re - k * (v.re * s_re - v.im * s_im),
        x.im - k * (v.re * s_im + v.im * s_re),
    )


def reflection_param_grad(
    r: Reflection, x: ComplexVector, g: ComplexVector
) -> Tuple[np.ndarray, np.ndarray]:
    """dL/dRe(v), dL/dIm(v) for y = R x, summed over batch axes.

    With s = <v, x>, a = <g, v> and nu = |v|^2:
        grad_v = (2/nu) [ (2/nu) Re(s a) v - conj(s) g - a x ]
    """
    _check_len(r.n, x)
    nu, s_re, s_im = _reflection_terms(r, x)
    v = r.v
    a_re, a_im = cdot(g, v)
    a_re, a_im = a_re[..., None], a_im[..., None]
    sa_re = s_re * a_re - s_im * a_im

    k = 2.0 / nu
    grad_re = k * (k * sa_re * v.re - (s_re * g.re + s_im * g.im) - (a_re * x.re - a_im * x.im))
    grad_im = k * (k * sa_re * v.im - (s_re * g.im - s_im * g.re) - (a_re * x.im + a_im * x.re))
    return grad_re.reshape(-1, r.n).sum(axis=0), grad_im.reshape(-1, r.n).sum(axis=0)


def apply_permutation(p: FixedPermutation, x: ComplexVector) -> ComplexVector:
    _check_len(p.n, x)
    return ComplexVector(x.re[..., p.indices], x.im[..., p.indices])


def apply_permutation_inverse(p: FixedPermutation, x: ComplexVector) -> ComplexVector:
    _check_len(p.n, x)
    inv = p.inverse
    return ComplexVector(x.re[..., inv], x.im[..., inv])


def _forward_stage(c: UnitaryComposition, stage: str, x: ComplexVector) -> ComplexVector:
    if stage == "fft":
        return fft_unitary(x)
    if stage == "ifft":
        return ifft_unitary(x)
    if stage == "perm":
        return apply_permutation(c.perm, x)
    if stage.startswith("d"):
        return apply_diag(getattr(c, stage), x)
    return apply_reflection(getattr(c, stage), x)


def composition_forward(
    c: UnitaryComposition, x: ComplexVector
) -> Tuple[ComplexVector, List[ComplexVector]]:
    """Apply W and return the output with its trace.

    trace[i] is the input seen by STAGES[i] and trace[-1] is the output.
    """
    _check_len(c.n, x)
    trace = [x]
    for stage in STAGES:
        x = _forward_stage(c, stage, x)
        trace.append(x)
    return x, trace


def apply_composition(c: UnitaryComposition, x: ComplexVector) -> ComplexVector:
    return composition_forward(c, x)[0]


def composition_vjp(
    c: UnitaryComposition,
    x: ComplexVector,
    g: ComplexVector,
    trace: Optional[List[ComplexVector]] = None,
) -> Tuple[ComplexVector, Dict[str, np.ndarray]]:
    """Backpropagate g through W.

    Returns the input cotangent W* g and the parameter gradients keyed as in
    UnitaryComposition.named_arrays. Pass the trace cached by
    composition_forward to skip recomputing the forward pass.
    """
    _check_len(c.n, x)
    _check_len(c.n, g)
    if trace is None:
        _, trace = composition_forward(c, x)
    if len(trace) != len(STAGES) + 1:
        raise ShapeError(f"trace must hold {len(STAGES) + 1} vectors, got {len(trace)}")

    grads: Dict[str, np.ndarray] = {}
    for i in reversed(range(len(STAGES))):
        stage, xin = STAGES[i], trace[i]
        if stage == "fft":
            g = ifft_unitary(g)
        elif stage == "ifft":
            g = fft_unitary(g)
        elif stage == "perm":
            g = apply_permutation_inverse(c.perm, g)
        elif stage.startswith("d"):
            d = getattr(c, stage)
            grads[stage] = diag_param_grad(d, xin, g, trace[i + 1])
            g = apply_diag_adjoint(d, g)
        else:
            r = getattr(c, stage)
            grads[f"{stage}.re"], grads[f"{stage}.im"] = reflection_param_grad(r, xin, g)
            # reflections are Hermitian
            g = apply_reflection(r, g)
    return g, grads


def materialize(c: UnitaryComposition) -> ComplexMatrix:
    """Dense matrix of W, column j = W e_j. Test support for small n only."""
    if c.n > MATERIALIZE_LIMIT:
        raise SizeGuardError(f"refusing to materialize n={c.n} > {MATERIALIZE_LIMIT}")
    basis = ComplexVector(np.eye(c.n), np.zeros((c.n, c.n)))
    cols = apply_composition(c, basis)
    logger.debug("materialized %dx%d unitary composition", c.n, c.n)
    return ComplexMatrix(cols.re.T.copy(), cols.im.T.copy())


def unitarity_error(c: UnitaryComposition) -> float:
    """max |M*M - I| over entries of the materialized matrix"""
    m = materialize(c).to_complex()
    return float(np.max(np.abs(m.conj().T @ m - np.eye(c.n))))


def norm_deviation(c: UnitaryComposition, x: ComplexVector) -> np.ndarray:
    """Relative norm change |(|Wx| - |x|)| / |x|"""
    nx = cnorm(x)
    return np.abs(cnorm(apply_composition(c, x)) - nx) / nx
