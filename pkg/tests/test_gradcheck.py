"""Finite-difference checker: exactness, kink handling, error reporting."""

import numpy as np
import pytest

from vclab import tensor as T
from vclab.gradcheck import grad_check
from vclab.tensor import DiffError


def test_linear_function_matches_to_rounding():
    c = np.array([2.0, -3.0, 0.5])
    rep = grad_check(lambda x: T.tsum(x * T.Tensor(c)), np.array([1.0, 2.0, 3.0]))
    assert rep.passed
    assert rep.max_rel_err < 1e-9
    np.testing.assert_allclose(rep.analytic, c, rtol=1e-12)


def test_relu_exactly_at_zero_is_flagged_and_excluded():
    point = np.array([-1.0, 0.0, 2.0])
    rep = grad_check(lambda x: T.tsum(T.relu(x)), point)
    assert rep.kinks.tolist() == [False, True, False]
    assert rep.passed  # smooth coordinates still agree


def test_quadratic_bowl_passes_default_tolerance():
    rng = np.random.default_rng(42)
    a = rng.normal(size=(4, 4))
    a = a @ a.T + np.eye(4)

    def f(x):
        return T.tsum(T.mul(x, T.matmul(T.Tensor(a), x))) * 0.5

    rep = grad_check(f, rng.normal(size=(4, 1)))
    assert rep.passed, rep.max_rel_err


def test_wrong_gradient_is_caught():
    # sum(x^2) computed forward, but gradient path sees a detached copy,
    # so the analytic gradient is zero while the numeric one is not.
    def f(x):
        frozen = T.Tensor(x.data * 2.0)  # constant from backward's view
        return T.tsum(x * frozen) * 0.5 + T.tsum(x * 0.0)

    rep = grad_check(f, np.array([1.0, 2.0]))
    assert not rep.passed


def test_non_finite_evaluation_raises():
    with pytest.raises(DiffError):
        grad_check(lambda x: T.tsum(T.log(x)), np.array([1e-300]))


def test_non_scalar_function_rejected():
    with pytest.raises(DiffError):
        grad_check(lambda x: x * 2.0, np.ones(3))
