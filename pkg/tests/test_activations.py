import math
from decimal import Decimal, localcontext

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eqgrad.activations import (ActivationKind, dropout, heatbath, maxpool_sets, normalize, perceptron,
                                scalar_act, sigmoid, sigmoid_prime, softmax, swish, tanh)
from eqgrad.autograd import Tape
from eqgrad.errors import ContractError, DegenerateInputError, RegistryError

lam = st.floats(-50, 50, allow_nan=False)


def test_scalar_values():
    assert scalar_act("relu", -2) == 0 and scalar_act("relu", 3) == 3
    assert scalar_act("sigmoid", 0) == 0.5
    assert scalar_act("swish", 0) == 0
    assert scalar_act("heaviside", 0) == 1
    assert scalar_act(ActivationKind("swish"), 2) == pytest.approx(2 / (1 + math.exp(-2)), rel=1e-15)
    assert scalar_act("swish", 2) == pytest.approx(1.7615941559557649, rel=1e-15)
    with pytest.raises(ContractError):
        scalar_act("softmax", 1.0)


def test_activation_kind_validation():
    with pytest.raises(ContractError):
        ActivationKind("swish", beta=0)
    with pytest.raises(ContractError):
        ActivationKind("dropout", p=1.0)
    with pytest.raises(ContractError):
        ActivationKind("maxpool", index_sets=((0,), ()))


def test_and_gate():
    table = {(x1, x2): perceptron([1, 1], -1.5, [x1, x2]) for x1 in (0, 1) for x2 in (0, 1)}
    assert table == {(0, 0): 0, (0, 1): 0, (1, 0): 0, (1, 1): 1}
    assert perceptron([0, 0], 0, [3, -7]) == 1


def test_perceptron_matches_inequality():
    rng = np.random.default_rng(1)
    for _ in range(200):
        w, x, b = rng.normal(size=4), rng.normal(size=4), rng.normal()
        assert perceptron(w, b, x) == int(float(w @ x) >= -b)


def test_softmax_cases():
    assert softmax([0, 0]).tolist() == [0.5, 0.5]
    assert np.allclose(softmax([7.0, 7.0, 7.0]), 1 / 3, rtol=0, atol=1e-16)
    with localcontext() as ctx:
        ctx.prec = 40
        e = [Decimal(v).exp() for v in (1, 2, 3)]
        oracle = [float(v / sum(e)) for v in e]
    assert np.max(np.abs(softmax([1, 2, 3]) - oracle)) <= 1e-12


@given(arrays(np.float64, st.integers(1, 30), elements=st.floats(-700, 700)))
def test_softmax_is_distribution(x):
    p = softmax(x)
    assert np.all(p >= 0) and np.all(p <= 1)
    assert abs(p.sum() - 1) <= 1e-12


def test_normalize_cases():
    assert normalize([1, -1]).tolist() == [1, -1]
    with pytest.raises(DegenerateInputError):
        normalize([5, 5, 5])
    x = np.random.default_rng(2).normal(3, 7, size=1000)
    y = normalize(x)
    assert abs(y.mean()) <= 1e-10 and abs(y.var() - 1) <= 1e-10
    mu = sum(x) / len(x)
    sd = math.sqrt(sum((v - mu) ** 2 for v in x) / len(x))
    assert np.max(np.abs(y - (x - mu) / sd)) <= 1e-12


def test_dropout():
    x = np.arange(1.0, 7.0)
    y, keep = dropout(x, 0.0, np.random.default_rng(0))
    assert np.array_equal(y, x) and keep.all()
    a = dropout(x, 0.3, np.random.default_rng(5))
    b = dropout(x, 0.3, np.random.default_rng(5))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    y, keep = dropout(np.ones(100_000), 0.5, np.random.default_rng(9))
    assert abs(keep.mean() - 0.5) <= 0.01
    assert set(np.unique(y)) <= {0.0, 1.0}  # kept entries are not rescaled


def test_heatbath():
    rng = np.random.default_rng(0)
    assert (heatbath(np.full(100_000, 30.0), rng) == 1).all()
    assert abs((heatbath(np.zeros(100_000), rng) == 1).mean() - 0.5) <= 0.01
    assert np.array_equal(heatbath(np.zeros(50), np.random.default_rng(3)),
                          heatbath(np.zeros(50), np.random.default_rng(3)))
    assert heatbath(0.0, rng) in (-1, 1)


def test_forward_only_ops_cannot_be_recorded():
    t = Tape()
    x = t.leaf([0.5])
    for tag in ("heaviside", "heatbath"):
        with pytest.raises(RegistryError):
            t.record(tag, [x])


def test_maxpool_sets():
    assert maxpool_sets([3, 1, 4, 1, 5], [[0, 1], [1, 3], [2, 4]]).tolist() == [3, 1, 5]


@given(lam)
def test_sigmoid_derivative_bounds(v):
    d = sigmoid_prime(np.array([v]))[0]
    assert 0 <= d <= 0.25
    assert d <= sigmoid_prime(np.array([0.0]))[0] == 0.25
    if abs(v) < 30:
        assert d > 0


@given(st.floats(-20, 20))
def test_tanh_sigmoid_identity(v):
    assert abs(tanh(np.array([v]))[0] - (2 * sigmoid(np.array([2 * v]))[0] - 1)) <= 1e-12


def test_swish_approaches_relu():
    x = np.linspace(-5, 5, 2001)
    assert np.max(np.abs(swish(x, beta=50) - np.maximum(x, 0))) <= 0.02


def test_sigmoid_extreme_inputs_are_finite():
    s = sigmoid(np.array([-1000.0, 1000.0]))
    assert s.tolist() == [0.0, 1.0]
