"""Adam optimizer behavior."""

import numpy as np
import pytest

from vclab import tensor as T
from vclab.optim import AdamState, adam_step
from vclab.tensor import DiffError, Tensor


def test_zero_gradient_leaves_parameters_unchanged():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    st = AdamState([p], lr=0.1)
    for _ in range(5):
        adam_step(st, {p: Tensor(np.zeros(2))})
    np.testing.assert_array_equal(p.data, [1.0, -2.0])
    assert st.step_count == 5


def test_single_step_unit_gradient_moves_minus_lr():
    p = Tensor(np.array([0.0]), requires_grad=True)
    st = AdamState([p], lr=0.1)
    adam_step(st, {p: Tensor(np.array([1.0]))})
    # bias-corrected moments give a unit-magnitude normalized step
    assert p.data[0] == pytest.approx(-0.1, rel=1e-6)


def test_constant_gradient_descends_against_sign():
    p = Tensor(np.array([0.5, -0.5]), requires_grad=True)
    st = AdamState([p])
    g = Tensor(np.array([2.0, -3.0]))
    for _ in range(50):
        adam_step(st, {p: g})
    assert p.data[0] < 0.5
    assert p.data[1] > -0.5


def test_shape_mismatch_rejected():
    p = Tensor(np.zeros(3), requires_grad=True)
    st = AdamState([p])
    with pytest.raises(DiffError):
        adam_step(st, {p: Tensor(np.zeros(4))})


def test_non_finite_gradient_rejected():
    p = Tensor(np.zeros(2), requires_grad=True)
    st = AdamState([p])
    with pytest.raises(DiffError):
        adam_step(st, {p: Tensor(np.array([1.0, np.inf]))})


def test_identical_runs_are_bit_identical():
    def run():
        p = Tensor(np.linspace(-1, 1, 8), requires_grad=True)
        st = AdamState([p], lr=3e-3)
        for k in range(40):
            with T.recording() as rec:
                loss = T.tsum(T.square(T.tanh(p) - 0.3)) * (1.0 + 0.01 * k)
            adam_step(st, T.backward(rec, loss))
        return p.data.copy()

    a, b = run(), run()
    np.testing.assert_array_equal(a, b)
