import numpy as np
import pytest

from urnn.core.complex_ops import ComplexVector
from urnn.core.unitary import DiagonalPhase, FixedPermutation, Reflection, UnitaryComposition


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_vector(rng, shape):
    return ComplexVector(rng.standard_normal(shape), rng.standard_normal(shape))


def random_composition(rng, n):
    d1, d2, d3 = (DiagonalPhase(rng.uniform(-np.pi, np.pi, n)) for _ in range(3))
    r1, r2 = (Reflection(random_vector(rng, n)) for _ in range(2))
    perm = FixedPermutation.from_seed(n, int(rng.integers(2**32)))
    return UnitaryComposition(d1=d1, d2=d2, d3=d3, r1=r1, r2=r2, perm=perm)


@pytest.fixture
def make_vector(rng):
    return lambda shape: random_vector(rng, shape)


@pytest.fixture
def make_composition(rng):
    return lambda n: random_composition(rng, n)
