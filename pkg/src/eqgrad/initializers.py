"""Variance-controlled random initialization.

Schemes and their weight variance (n = fan-in, m = fan-out):

==========================  ======================  ==============
scheme                      Var(A_ij)               biases
==========================  ======================  ==============
``sigmoid_balanced``        16 / n                  0
``relu_balanced_uniform``   2 / n  (Unif[-a, a],    Unif[-a, a]
                            a = sqrt(6 / n))
``xavier``                  2 / (n + m)             0
``gain`` (alpha)            alpha^2 * 2 / (n + m)   0
==========================  ======================  ==============

He initialization is ``gain`` with alpha = sqrt(2), i.e. 4 / (n + m).
Uniform sampling uses the bound a = sqrt(3 Var) so both distributions share
the variance. Random generators are numpy ``Generator`` objects (PCG64);
child streams come from ``SeedSequence.spawn``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autograd import Tape
from .errors import ContractError

GAINS = {"linear": 1.0, "identity": 1.0, "sigmoid": 4.0, "relu": math.sqrt(2.0), "tanh": 1.0}

SCHEMES = ("sigmoid_balanced", "relu_balanced_uniform", "xavier", "gain")


@dataclass(frozen=True)
class InitScheme:
    tag: str
    fan_in: int
    fan_out: int = 1
    dist: str = "normal"
    alpha: float = 1.0

    def __post_init__(self):
        if self.tag not in SCHEMES:
            raise ContractError(f"unknown init scheme {self.tag!r}")
        if self.fan_in < 1 or self.fan_out < 1:
            raise ContractError("fan-in and fan-out must be >= 1")
        if not self.alpha > 0:
            raise ContractError("gain must be positive")
        if self.dist not in ("normal", "uniform"):
            raise ContractError(f"unknown distribution {self.dist!r}")

    @property
    def distribution(self) -> str:
        return "uniform" if self.tag == "relu_balanced_uniform" else self.dist


def he(fan_in: int, fan_out: int, dist: str = "normal") -> InitScheme:
    return InitScheme("gain", fan_in, fan_out, dist, alpha=math.sqrt(2.0))


def scheme_variance(scheme: InitScheme) -> float:
    n, m = scheme.fan_in, scheme.fan_out
    if scheme.tag == "sigmoid_balanced":
        return 16.0 / n
    if scheme.tag == "relu_balanced_uniform":
        a = math.sqrt(6.0 / n)
        return a * a / 3.0
    if scheme.tag == "xavier":
        return 2.0 / (n + m)
    return scheme.alpha**2 * 2.0 / (n + m)


def uniform_bound(scheme: InitScheme) -> float:
    return math.sqrt(3.0 * scheme_variance(scheme))


def sample_params(scheme: InitScheme, shape: Sequence[int], rng: np.random.Generator) -> np.ndarray:
    var = scheme_variance(scheme)
    if scheme.distribution == "uniform":
        a = math.sqrt(3.0 * var)
        return rng.uniform(-a, a, size=tuple(shape))
    return rng.normal(0.0, math.sqrt(var), size=tuple(shape))


def sample_bias(scheme: InitScheme, shape: Sequence[int], rng: np.random.Generator) -> np.ndarray:
    """Biases are zero except for the ReLU balanced scheme, which draws them like the weights."""
    if scheme.tag == "relu_balanced_uniform":
        return sample_params(scheme, shape, rng)
    return np.zeros(tuple(shape))


def scheme_for(name: str, fan_in: int, fan_out: int, act: str = "relu") -> InitScheme:
    """Map a CLI-level name (xavier | relu | sigmoid | he) to a scheme."""
    if name == "xavier":
        return InitScheme("xavier", fan_in, fan_out)
    if name == "he":
        return he(fan_in, fan_out)
    if name == "relu":
        return InitScheme("relu_balanced_uniform", fan_in, fan_out)
    if name == "sigmoid":
        return InitScheme("sigmoid_balanced", fan_in, fan_out)
    raise ContractError(f"unknown init {name!r}")


def signal_variance_probe(layer, input_var: float, trials: int, rng: np.random.Generator) -> float:
    """Monte-Carlo ratio of output to input signal power for a dense layer.

    Inputs are i.i.d. N(0, input_var). The ratio is sum_i E[Y_i^2] / sum_j E[X_j^2]
    (second moments about zero, which is what the fan-in derivations keep
    constant; for zero-mean outputs it is the variance ratio).
    """
    if trials < 1000:
        raise ContractError("need at least 1000 trials for a meaningful estimate")
    x = rng.normal(0.0, math.sqrt(input_var), size=(trials, layer.fan_in))
    tape = Tape()
    y = tape.value(layer.forward(tape, tape.leaf(x))).data
    return float(np.sum(np.mean(y * y, axis=0)) / np.sum(np.mean(x * x, axis=0)))


def spawn(rng_or_seed, n: int) -> list[np.random.Generator]:
    """Independent child generators."""
    if isinstance(rng_or_seed, np.random.Generator):
        seeds = rng_or_seed.bit_generator.seed_seq.spawn(n)
    else:
        seeds = np.random.SeedSequence(rng_or_seed).spawn(n)
    return [np.random.default_rng(s) for s in seeds]
