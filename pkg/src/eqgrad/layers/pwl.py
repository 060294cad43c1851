"""Shallow scalar ReLU networks and the piecewise-linear functions they represent."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ContractError


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function on [0, 1].

    ``breakpoints`` are 0 = beta_1 < ... < beta_{N+1} = 1, ``slopes`` the N
    slopes, ``value_at_0`` the value f(0).
    """

    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    value_at_0: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        if len(self.slopes) < 1 or b.size != len(self.slopes) + 1:
            raise ContractError("need N >= 1 slopes and N + 1 breakpoints")
        if b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
            raise ContractError("breakpoints must increase strictly from 0 to 1")

    @property
    def n_pieces(self) -> int:
        return len(self.slopes)

    def knot_values(self) -> np.ndarray:
        b = np.asarray(self.breakpoints)
        return self.value_at_0 + np.concatenate([[0.0], np.cumsum(np.asarray(self.slopes) * np.diff(b))])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        b = np.asarray(self.breakpoints)
        piece = np.clip(np.searchsorted(b, x, side="right") - 1, 0, self.n_pieces - 1)
        return self.knot_values()[piece] + np.asarray(self.slopes)[piece] * (x - b[piece])


@dataclass(frozen=True)
class ShallowNet:
    """F(x) = sum_i c_i relu(a_i x + b_i)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pre = np.multiply.outer(x, self.a) + self.b
        return np.maximum(pre, 0.0) @ self.c


def pwl_to_shallow(pwl: PiecewiseLinear) -> ShallowNet:
    """Exact shallow ReLU representation with N + 1 neurons.

    Neuron i < N+1 is relu(x - beta_i) with output weight alpha_i - alpha_{i-1}
    (alpha_0 = 0); neuron N+1 is the constant relu(0 x + 1) = 1 scaled by f(0).
    """
    n = pwl.n_pieces
    beta = np.asarray(pwl.breakpoints[:-1], dtype=float)
    alpha = np.asarray(pwl.slopes, dtype=float)
    a = np.append(np.ones(n), 0.0)
    b = np.append(-beta, 1.0)
    c = np.append(np.diff(alpha, prepend=0.0), pwl.value_at_0)
    return ShallowNet(a, b, c)


def pwl_approximant(f: Callable[[np.ndarray], np.ndarray], n: int) -> PiecewiseLinear:
    """Linear interpolant of ``f`` at the knots i / n."""
    if n < 1:
        raise ContractError("need at least one piece")
    knots = np.arange(n + 1) / n
    values = np.asarray(f(knots), dtype=float)
    return PiecewiseLinear(tuple(knots), tuple(np.diff(values) * n), float(values[0]))


def sawtooth(x):
    """relu(2x) - relu(4x - 2) + relu(2x - 2): the tent map on [0, 1]."""
    x = np.asarray(x, dtype=float)
    r = lambda t: np.maximum(t, 0.0)  # noqa: E731
    return r(2 * x) - r(4 * x - 2) + r(2 * x - 2)


def sawtooth_compose(k: int) -> Callable[[np.ndarray], np.ndarray]:
    """k-fold composition of :func:`sawtooth`; it has 2^(k-1) teeth on [0, 1]."""
    if k < 1:
        raise ContractError("k must be >= 1")

    def f(x):
        for _ in range(k):
            x = sawtooth(x)
        return x

    return f
