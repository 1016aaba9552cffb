import numpy as np
import pytest
from numpy.testing import assert_allclose

from urnn.core.errors import InvalidParameterError, NonFiniteError, ShapeError
from urnn.core.optim import (
    TANH_SPECTRAL_RADIUS,
    RMSPropState,
    glorot_uniform,
    init_rnn,
    init_urnn,
    rmsprop_update,
    spectral_radius,
)
from urnn.models.params import ModelDims


def test_zero_gradient_only_decays_accumulator():
    state = RMSPropState(accum={"w": np.full(3, 0.5)})
    params = {"w": np.array([1.0, 2.0, 3.0])}
    rmsprop_update(state, params, {"w": np.zeros(3)})
    assert_allclose(params["w"], [1.0, 2.0, 3.0])
    assert_allclose(state.accum["w"], 0.45)


def test_first_step_value():
    state = RMSPropState(lr=1e-3, decay=0.9, eps=1e-8)
    params = {"w": np.zeros(1)}
    rmsprop_update(state, params, {"w": np.ones(1)})
    assert state.accum["w"][0] == pytest.approx(0.1)
    assert params["w"][0] == pytest.approx(-3.1623e-3, rel=1e-4)


def test_second_step_is_smaller():
    state = RMSPropState()
    params = {"w": np.zeros(1)}
    rmsprop_update(state, params, {"w": np.ones(1)})
    first = params["w"][0]
    rmsprop_update(state, params, {"w": np.ones(1)})
    second = params["w"][0] - first
    assert second / first == pytest.approx((np.sqrt(0.1) + 1e-8) / (np.sqrt(0.19) + 1e-8))


def test_update_is_elementwise_and_order_independent(rng):
    g = {"a": rng.standard_normal(4), "b": rng.standard_normal((2, 3))}
    p1 = {"a": np.ones(4), "b": np.ones((2, 3))}
    p2 = {"b": np.ones((2, 3)), "a": np.ones(4)}
    s1, s2 = RMSPropState(), RMSPropState()
    rmsprop_update(s1, p1, g)
    rmsprop_update(s2, p2, {"b": g["b"], "a": g["a"]})
    for name in p1:
        assert np.array_equal(p1[name], p2[name])
        assert np.array_equal(s1.accum[name], s2.accum[name])
        assert np.all(s1.accum[name] >= 0)


def test_nonfinite_gradient_names_group_and_leaves_params():
    state = RMSPropState()
    params = {"w_hh": np.ones(2), "b_h": np.ones(2)}
    with pytest.raises(NonFiniteError, match="b_h"):
        rmsprop_update(state, params, {"w_hh": np.ones(2), "b_h": np.array([np.nan, 0.0])})
    assert_allclose(params["w_hh"], 1.0)
    assert state.accum == {}


def test_shape_mismatch_rejected():
    with pytest.raises(ShapeError):
        rmsprop_update(RMSPropState(), {"w": np.ones(2)}, {"w": np.ones(3)})
    with pytest.raises(ShapeError):
        rmsprop_update(RMSPropState(), {"w": np.ones(2)}, {"v": np.ones(2)})


def test_invalid_hyperparameters():
    with pytest.raises(InvalidParameterError):
        RMSPropState(decay=1.0)
    with pytest.raises(InvalidParameterError):
        RMSPropState(lr=0.0)


def test_glorot_bounds(rng):
    w = glorot_uniform(rng, 30, 10)
    assert w.shape == (30, 10)
    assert np.abs(w).max() <= np.sqrt(6.0 / 40)


def test_urnn_init_values():
    p = init_urnn(ModelDims(2, 16, 1), 7)
    assert np.all(p.b == 0) and np.all(p.b_o == 0)
    assert np.all(np.abs(p.w.d1.w) <= np.pi)
    assert np.all(np.abs(p.w.r1.v.re) <= 1.0) and np.all(np.abs(p.w.r2.v.im) <= 1.0)
    bound = np.sqrt(3.0 / 32)
    assert np.all(np.abs(p.h0.re) <= bound) and np.all(np.abs(p.h0.im) <= bound)


def test_urnn_init_is_deterministic():
    a = init_urnn(ModelDims(3, 8, 2), 5)
    b = init_urnn(ModelDims(3, 8, 2), 5)
    for name, array in a.named_arrays().items():
        assert np.array_equal(array, b.named_arrays()[name])
    assert np.array_equal(a.w.perm.indices, b.w.perm.indices)


def test_urnn_init_rejects_non_power_of_two():
    with pytest.raises(InvalidParameterError):
        init_urnn(ModelDims(2, 12, 1), 0)


def test_h0_has_unit_expected_squared_norm():
    squared = [np.sum(init_urnn(ModelDims(1, 128, 1), s).h0.stacked() ** 2) for s in range(10000)]
    assert np.mean(squared) == pytest.approx(1.0, abs=0.05)


def test_phase_angles_are_uniform():
    angles = np.concatenate([init_urnn(ModelDims(1, 512, 1), s).w.d2.w for s in range(200)])
    assert angles.size >= 100_000
    assert np.all(np.abs(angles) <= np.pi)
    counts, _ = np.histogram(angles, bins=32, range=(-np.pi, np.pi))
    expected = angles.size / 32
    chi2 = np.sum((counts - expected) ** 2 / expected)
    # 31 degrees of freedom, upper 0.1% point
    assert chi2 < 61.1


def test_irnn_identity_and_tanh_contracting():
    assert np.array_equal(init_rnn(ModelDims(2, 5, 1), 0, activation="relu").w_hh, np.eye(5))
    w = init_rnn(ModelDims(2, 5, 1), 0).w_hh
    assert not np.array_equal(w, np.eye(5))
    assert spectral_radius(w) == pytest.approx(TANH_SPECTRAL_RADIUS)


def test_tanh_init_is_deterministic():
    a = init_rnn(ModelDims(2, 128, 1), 3).w_hh
    assert np.array_equal(a, init_rnn(ModelDims(2, 128, 1), 3).w_hh)
    assert spectral_radius(a) == pytest.approx(TANH_SPECTRAL_RADIUS)
