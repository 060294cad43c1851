"""Activation functions.

Scalar activations apply pointwise to tensors. ``relu``'s derivative at 0 is
taken to be 1 (indicator of ``t >= 0``), which differs from the 0 used by most
frameworks. Dropout zeroes entries without the usual ``1/(1-p)`` rescaling.
Heaviside and heatbath are forward-only and have no backward rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .autograd import register
from .errors import ContractError, DegenerateInputError, ShapeError
from .tensor import ArrayLike, as_array

EPS_VAR = 1e-12


@dataclass(frozen=True)
class ActivationKind:
    tag: str
    beta: float = 1.0  # swish
    p: float = 0.0  # dropout
    index_sets: Optional[tuple[tuple[int, ...], ...]] = None  # maxpool

    def __post_init__(self):
        if self.tag == "swish" and not self.beta > 0:
            raise ContractError("swish needs beta > 0")
        if self.tag == "dropout" and not 0 <= self.p < 1:
            raise ContractError("dropout needs 0 <= p < 1")
        if self.tag == "maxpool" and (not self.index_sets or any(len(s) == 0 for s in self.index_sets)):
            raise ContractError("maxpool needs non-empty index sets")


def heaviside(x):
    return np.where(np.asarray(x, dtype=np.float64) >= 0, 1.0, 0.0)


def relu(x):
    return np.maximum(as_array(x), 0.0)


def sigmoid(x):
    x = as_array(x)
    # split by sign so exp never overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(x):
    return np.tanh(as_array(x))


def swish(x, beta: float = 1.0):
    x = as_array(x)
    return x * sigmoid(beta * x)


def sigmoid_prime(x):
    s = sigmoid(x)
    return s * (1.0 - s)


_SCALAR = {
    "heaviside": heaviside,
    "relu": relu,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "identity": lambda x: as_array(x).copy(),
}


def scalar_act(kind, lam):
    """Apply a scalar activation; ``kind`` is a tag string or an :class:`ActivationKind`."""
    if isinstance(kind, str):
        kind = ActivationKind(kind)
    if kind.tag == "swish":
        out = swish(np.asarray(lam, dtype=np.float64), kind.beta)
    elif kind.tag in _SCALAR:
        out = _SCALAR[kind.tag](np.asarray(lam, dtype=np.float64))
    else:
        raise ContractError(f"{kind.tag!r} is not a scalar activation")
    return float(out) if np.ndim(lam) == 0 else out


def perceptron(w: ArrayLike, b: float, x: ArrayLike) -> int:
    """Heaviside neuron H(w.x + b)."""
    w, x = as_array(w), as_array(x)
    if w.shape != x.shape:
        raise ShapeError(f"weights {w.shape} and input {x.shape} differ")
    return int(float(w @ x) + b >= 0)


def softmax(x: ArrayLike, axis: int = -1) -> np.ndarray:
    x = as_array(x)
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def normalize(x: ArrayLike) -> np.ndarray:
    """Standardize over the whole tensor with the population variance."""
    x = as_array(x)
    if x.size < 2:
        raise ShapeError("normalize needs at least two entries")
    mu = x.mean()
    var = np.mean((x - mu) ** 2)
    if var <= EPS_VAR:
        raise DegenerateInputError(f"variance {var:.3g} too small to normalize")
    return (x - mu) / math.sqrt(var)


def dropout(x: ArrayLike, p: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Zero each entry independently with probability ``p``; returns (output, keep-mask)."""
    if not 0 <= p < 1:
        raise ContractError("dropout needs 0 <= p < 1")
    x = as_array(x)
    keep = rng.random(x.shape) >= p
    return np.where(keep, x, 0.0), keep


def heatbath(lam, rng: np.random.Generator):
    """Stochastic +-1 unit: +1 with probability sigmoid(lam)."""
    p = sigmoid(np.asarray(lam, dtype=np.float64))
    out = np.where(rng.random(np.shape(p)) < p, 1.0, -1.0)
    return int(out) if np.ndim(lam) == 0 else out


def maxpool_sets(x: ArrayLike, index_sets: Sequence[Sequence[int]]) -> np.ndarray:
    """Vector max pooling: output i is the max of x over the index set I_i."""
    x = as_array(x)
    return np.array([x[list(s)].max() for s in index_sets])


# -- backward rules ---------------------------------------------------------------

register("relu", lambda x: (np.maximum(x, 0.0), (x,)),
         lambda saved, g: (g * (saved[0] >= 0),), arity=1)


def _sigmoid_fwd(x):
    s = sigmoid(x)
    return s, (s,)


register("sigmoid", _sigmoid_fwd, lambda saved, g: (g * saved[0] * (1.0 - saved[0]),), arity=1)


def _tanh_fwd(x):
    t = np.tanh(x)
    return t, (t,)


register("tanh", _tanh_fwd, lambda saved, g: (g * (1.0 - saved[0] ** 2),), arity=1)


def _swish_fwd(x, beta=1.0):
    s = sigmoid(beta * x)
    return x * s, (x, s)


def _swish_vjp(saved, g, beta=1.0):
    x, s = saved
    return (g * (s + beta * x * s * (1.0 - s)),)


register("swish", _swish_fwd, _swish_vjp, arity=1)


def _softmax_fwd(x):
    s = softmax(x)
    return s, (s,)


def _softmax_vjp(saved, g):
    (s,) = saved
    return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)


register("softmax", _softmax_fwd, _softmax_vjp, arity=1)


def _normalize_fwd(x):
    y = normalize(x)
    sd = math.sqrt(np.mean((x - x.mean()) ** 2))
    return y, (y, sd)


def _normalize_vjp(saved, g):
    y, sd = saved
    return ((g - g.mean() - y * np.mean(g * y)) / sd,)


register("normalize", _normalize_fwd, _normalize_vjp, arity=1)


def _dropout_fwd(x, p, rng):
    y, keep = dropout(x, p, rng)
    return y, (keep,)


register("dropout", _dropout_fwd, lambda saved, g, **_: (g * saved[0],), arity=1)

register("heaviside", lambda x: (heaviside(x), ()), None, arity=1)
register("heatbath", lambda x, rng: (heatbath(x, rng), ()), None, arity=1)


def activation_tag(kind) -> str:
    return kind if isinstance(kind, str) else kind.tag


def apply_recorded(tape, node, kind):
    """Record activation ``kind`` on ``node``; 'identity' records nothing."""
    if kind is None:
        return node
    if isinstance(kind, str):
        kind = ActivationKind(kind)
    if kind.tag == "identity":
        return node
    if kind.tag == "swish":
        return tape.record("swish", [node], beta=kind.beta)
    return tape.record(kind.tag, [node])
