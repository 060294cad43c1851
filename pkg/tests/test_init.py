import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eqgrad.errors import ContractError
from eqgrad.initializers import (GAINS, InitScheme, he, sample_bias, sample_params, scheme_for, scheme_variance,
                                 signal_variance_probe, spawn, uniform_bound)
from eqgrad.layers import DenseLayer

N = 100_000

ALL_SCHEMES = [
    InitScheme("sigmoid_balanced", 16),
    InitScheme("relu_balanced_uniform", 6),
    InitScheme("xavier", 30, 50),
    InitScheme("xavier", 30, 50, dist="uniform"),
    InitScheme("gain", 20, 40, alpha=math.sqrt(2)),
    InitScheme("gain", 20, 40, dist="uniform", alpha=3.0),
]


def variance_se(scheme, n):
    """Standard error of the sample variance: sqrt((mu4 - var^2) / n)."""
    var = scheme_variance(scheme)
    kurt = 3.0 if scheme.distribution == "normal" else 9.0 / 5.0
    return var * math.sqrt((kurt - 1) / n)


def test_variance_examples():
    assert scheme_variance(InitScheme("sigmoid_balanced", 16)) == 1.0
    assert scheme_variance(InitScheme("xavier", 2, 2)) == 0.5
    assert scheme_variance(InitScheme("relu_balanced_uniform", 6)) == pytest.approx(1 / 3, rel=1e-15)
    for n in (1, 7, 64):
        assert scheme_variance(he(n, n)) == pytest.approx(4 / (2 * n), rel=1e-15)
        assert scheme_variance(InitScheme("gain", n, n, alpha=GAINS["relu"])) == pytest.approx(2 / n, rel=1e-15)


def test_scheme_validation():
    with pytest.raises(ContractError):
        InitScheme("orthogonal", 3)
    with pytest.raises(ContractError):
        InitScheme("xavier", 0, 3)
    with pytest.raises(ContractError):
        InitScheme("gain", 3, 3, alpha=0)
    with pytest.raises(ContractError):
        scheme_for("lsuv", 3, 3)


@pytest.mark.parametrize("scheme", ALL_SCHEMES, ids=lambda s: f"{s.tag}-{s.dist}")
def test_sample_statistics(scheme):
    w = sample_params(scheme, (N,), np.random.default_rng(11))
    var = scheme_variance(scheme)
    assert abs(w.var() - var) <= 3 * variance_se(scheme, N)
    assert abs(w.mean()) <= 3 * math.sqrt(var / N)
    if scheme.distribution == "uniform":
        assert np.max(np.abs(w)) <= uniform_bound(scheme)


def test_sigmoid_balanced_band():
    w = sample_params(InitScheme("sigmoid_balanced", 16), (N,), np.random.default_rng(1))
    assert abs(w.var() - 1.0) <= 0.03


def test_relu_uniform_bound_and_biases():
    s = InitScheme("relu_balanced_uniform", 6)
    assert uniform_bound(s) == pytest.approx(1.0, rel=1e-15)
    rng = np.random.default_rng(2)
    w, b = sample_params(s, (N,), rng), sample_bias(s, (1000,), rng)
    assert np.all(np.abs(w) <= 1) and np.all(np.abs(b) <= 1) and b.any()
    assert not sample_bias(InitScheme("xavier", 4, 4), (10,), rng).any()
    assert not sample_bias(InitScheme("sigmoid_balanced", 4), (10,), rng).any()


def test_sampling_is_deterministic():
    s = InitScheme("xavier", 5, 7)
    assert np.array_equal(sample_params(s, (5, 7), np.random.default_rng(3)),
                          sample_params(s, (5, 7), np.random.default_rng(3)))
    a, b = spawn(4, 2)
    assert not np.array_equal(a.random(5), b.random(5))
    assert np.array_equal(spawn(4, 2)[1].random(3), spawn(4, 2)[1].random(3))


@given(st.integers(1, 10_000), st.integers(1, 10_000))
def test_xavier_is_harmonic_compromise(n, m):
    inv = 1 / scheme_variance(InitScheme("xavier", n, m))
    assert inv == pytest.approx((n + m) / 2, rel=1e-14)
    assert inv == pytest.approx((1 / (1 / n) + 1 / (1 / m)) / 2, rel=1e-14)


def _layer(scheme, act, rng, n=256):
    return DenseLayer(sample_params(scheme, (n, n), rng), np.zeros(n), act=act)


def test_signal_probe():
    rng = np.random.default_rng(5)
    lin = signal_variance_probe(_layer(InitScheme("xavier", 256, 256), "identity", rng), 1.0, 10_000, rng)
    assert 0.9 <= lin <= 1.1
    rel = signal_variance_probe(_layer(he(256, 256), "relu", rng), 1.0, 10_000, rng)
    assert 0.8 <= rel <= 1.25
    zero = DenseLayer(np.zeros((4, 4)), np.zeros(4))
    assert signal_variance_probe(zero, 1.0, 1000, rng) == 0.0
    with pytest.raises(ContractError):
        signal_variance_probe(zero, 1.0, 999, rng)
