"""
Complex arithmetic on (real, imaginary) array pairs.

Every complex quantity in the package is carried as two real arrays so the
whole model can be written, differentiated and checkpointed with real numbers
only. Arrays may carry leading batch axes; the complex dimension is always
the last axis.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

from urnn.core.errors import ShapeError, UnsupportedSizeError


@dataclass(frozen=True)
class ComplexVector:
    """A complex vector (or batch of vectors) stored as separate re/im arrays"""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        if np.shape(self.re) != np.shape(self.im):
            raise ShapeError(
                f"re and im must have equal shapes, got {np.shape(self.re)} and {np.shape(self.im)}"
            )

    @property
    def n(self) -> int:
        return int(np.shape(self.re)[-1])

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(np.shape(self.re))

    @classmethod
    def zeros(cls, shape: Union[int, Tuple[int, ...]]) -> "ComplexVector":
        return cls(np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_complex(cls, z: np.ndarray) -> "ComplexVector":
        z = np.asarray(z, dtype=np.complex128)
        return cls(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag))

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    def stacked(self) -> np.ndarray:
        """(Re, Im) stacked along the last axis: length 2n"""
        return np.concatenate([self.re, self.im], axis=-1)

    def conj(self) -> "ComplexVector":
        return ComplexVector(self.re, -self.im)

    def scale(self, alpha: float) -> "ComplexVector":
        return ComplexVector(alpha * self.re, alpha * self.im)

    def __add__(self, other: "ComplexVector") -> "ComplexVector":
        return ComplexVector(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexVector") -> "ComplexVector":
        return ComplexVector(self.re - other.re, self.im - other.im)


@dataclass(frozen=True)
class ComplexMatrix:
    """A complex matrix A + iB stored as two real n_out x n_in arrays"""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if np.shape(self.a) != np.shape(self.b) or np.ndim(self.a) != 2:
            raise ShapeError(
                f"a and b must be 2-D arrays of equal shape, got {np.shape(self.a)} and {np.shape(self.b)}"
            )

    @property
    def n_out(self) -> int:
        return int(self.a.shape[0])

    @property
    def n_in(self) -> int:
        return int(self.a.shape[1])

    def to_complex(self) -> np.ndarray:
        return self.a + 1j * self.b

    def block_real(self) -> np.ndarray:
        """The 2n_out x 2n_in real matrix [[A, -B], [B, A]]"""
        return np.block([[self.a, -self.b], [self.b, self.a]])


def cnorm(x: ComplexVector) -> Union[float, np.ndarray]:
    """L2 norm of the stacked real representation (per vector for batches)"""
    return np.sqrt(np.sum(x.re * x.re + x.im * x.im, axis=-1))


def cdot(u: ComplexVector, x: ComplexVector) -> Tuple[np.ndarray, np.ndarray]:
    """Inner product <u, x> = sum conj(u_j) x_j, returned as (re, im)"""
    re = np.sum(u.re * x.re + u.im * x.im, axis=-1)
    im = np.sum(u.re * x.im - u.im * x.re, axis=-1)
    return re, im


def complex_matvec(m: ComplexMatrix, x: ComplexVector) -> ComplexVector:
    """(A x_re - B x_im) + i (A x_im + B x_re), batched over leading axes"""
    if x.n != m.n_in:
        raise ShapeError(f"matrix expects length {m.n_in}, got {x.n}")
    re = x.re @ m.a.T - x.im @ m.b.T
    im = x.im @ m.a.T + x.re @ m.b.T
    return ComplexVector(re, im)


def _check_power_of_two(n: int):
    if n < 1 or n & (n - 1):
        raise UnsupportedSizeError(f"FFT length must be a power of two, got {n}")


@lru_cache(maxsize=None)
def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _stage_twiddles(n: int, sign: int) -> Tuple[np.ndarray, ...]:
    """Twiddle factors for every butterfly stage of a length-n transform"""
    stages = []
    m = 2
    while m <= n:
        k = np.arange(m // 2)
        stages.append(np.exp(sign * 2j * np.pi * k / m))
        m <<= 1
    return tuple(stages)


def _radix2(x: ComplexVector, sign: int) -> ComplexVector:
    """Iterative decimation-in-time radix-2 transform with 1/sqrt(n) scaling"""
    n = x.n
    _check_power_of_two(n)
    lead = x.shape[:-1]
    rev = _bit_reverse_indices(n)
    z = np.empty(lead + (n,), dtype=np.complex128)
    z.real = x.re[..., rev]
    z.imag = x.im[..., rev]
    z = z.reshape(-1, n)
    rows = z.shape[0]
    buf = np.empty_like(z)
    scratch = np.empty((rows, n // 2), dtype=np.complex128)

    # ping-pong between z and buf, one butterfly pass per stage
    for tw in _stage_twiddles(n, sign):
        half = tw.shape[0]
        shape = (rows, n // (2 * half), 2 * half)
        src, dst = z.reshape(shape), buf.reshape(shape)
        t = np.multiply(src[..., half:], tw, out=scratch.reshape(shape[:2] + (half,)))
        np.add(src[..., :half], t, out=dst[..., :half])
        np.subtract(src[..., :half], t, out=dst[..., half:])
        z, buf = buf, z

    z *= 1.0 / np.sqrt(n)
    z = z.reshape(lead + (n,))
    return ComplexVector(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag))


def fft_unitary(x: ComplexVector) -> ComplexVector:
    """Unitary DFT: X_k = n^{-1/2} sum_j x_j e^{-2 pi i jk/n}"""
    return _radix2(x, -1)


def ifft_unitary(x: ComplexVector) -> ComplexVector:
    """Adjoint (and inverse) of fft_unitary"""
    return _radix2(x, +1)


def naive_dft(x: ComplexVector) -> ComplexVector:
    """O(n^2) unitary DFT by direct summation; any n >= 1"""
    n = x.n
    jk = np.outer(np.arange(n), np.arange(n)) * (2.0 * np.pi / n)
    c, s = np.cos(jk), np.sin(jk)
    # e^{-i theta} = cos theta - i sin theta, and c, s are symmetric
    re = (x.re @ c + x.im @ s) / np.sqrt(n)
    im = (x.im @ c - x.re @ s) / np.sqrt(n)
    return ComplexVector(re, im)
