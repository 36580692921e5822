import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from markov_cce import exp3


@pytest.mark.parametrize("A", [1, 2, 4, 7])
def test_init_uniform(A):
    st_ = exp3.init(A, 0.3)
    assert np.allclose(st_.weights, 1.0 / A)
    w = st_.weights
    assert -np.sum(w * np.log(w)) == pytest.approx(math.log(A))


def test_init_rejects():
    with pytest.raises(ValueError):
        exp3.init(0, 0.1)
    with pytest.raises(ValueError):
        exp3.init(2, 0.0)


def test_zero_loss_identity():
    s0 = exp3.init(3, 0.5)
    s1 = exp3.update(s0, np.zeros(3))
    assert np.allclose(s1.weights, s0.weights) and s1.round == 1


def test_two_action_update_value():
    w = exp3.update(exp3.init(2, 0.5), [1.0, 0.0]).weights
    assert w == pytest.approx([0.3775406687981454, 0.6224593312018546], abs=1e-12)
    assert w[0] == pytest.approx(math.exp(-0.5) / (1 + math.exp(-0.5)), abs=1e-15)


@given(st.lists(st.floats(-1.0, 5.0), min_size=2, max_size=6), st.floats(-0.5, 3.0))
def test_shift_invariance(c, shift):
    s = exp3.init(len(c), 0.5)
    a = exp3.update(s, np.array(c)).weights
    b = exp3.update(s, np.array(c) + shift).weights
    assert np.allclose(a, b, atol=1e-12)


def test_precondition_raises():
    with pytest.raises(exp3.Exp3PreconditionError):
        exp3.update(exp3.init(2, 0.5), [-2.5, 0.0])
    exp3.update(exp3.init(2, 0.5), [-2.0, 0.0])   # eta * c = -1 exactly is allowed


def test_huge_losses_stay_finite():
    s = exp3.init(3, 1.0)
    for _ in range(50):
        s = exp3.update(s, [1e6, 0.0, 5e5])
    assert np.all(np.isfinite(s.weights)) and s.weights[1] == pytest.approx(1.0)


def test_certificate_zero_losses():
    lhs, rhs = exp3.regret_certificate(np.zeros((10, 4)), np.eye(4)[0], 0.2)
    assert lhs == 0.0 and rhs == pytest.approx(math.log(4) / 0.2)


@given(st.integers(2, 8), st.floats(0.01, 1.0), st.integers(0, 2**31))
def test_certificate_holds_both_comparators(A, eta, seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1.0, 3.0, size=(60, A)) / eta
    best = np.eye(A)[int(np.argmin(c.sum(axis=0)))]
    # average iterate as the second comparator
    s = exp3.init(A, eta)
    xs = []
    for ct in c:
        xs.append(s.weights)
        s = exp3.update(s, ct)
    avg = np.mean(xs, axis=0)
    for y in (best, avg):
        lhs, rhs = exp3.regret_certificate(c, y, eta)
        assert lhs <= rhs + 1e-9 * max(1.0, abs(rhs))


def test_bank_matches_independent_learners():
    rng = np.random.default_rng(0)
    eta = np.array([0.1, 0.7, 0.3])
    bank = exp3.Exp3Bank(3, 2, eta)
    singles = [exp3.init(2, e) for e in eta]
    for _ in range(20):
        c = rng.random((3, 2))
        bank.update(c)
        singles = [exp3.update(s, c[k]) for k, s in enumerate(singles)]
    for k in range(3):
        assert np.allclose(bank.policy()[k], singles[k].weights)
        assert bank.state(k).eta == eta[k]


def test_bank_precondition_per_state():
    bank = exp3.Exp3Bank(2, 2, [1.0, 0.1])
    bank.update(np.array([[0.0, 0.0], [-5.0, 0.0]]))
    with pytest.raises(exp3.Exp3PreconditionError, match="state 0"):
        bank.update(np.array([[-5.0, 0.0], [0.0, 0.0]]))
