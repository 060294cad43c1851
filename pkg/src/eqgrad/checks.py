"""Finite-difference gradient checks for every differentiable op and two full networks.

Each case builds ``(fn, inputs)`` for :func:`~eqgrad.autograd.gradcheck`. Op
cases reduce the op's output to a scalar through a fixed random projection,
so every output entry contributes. Inputs of piecewise-linear ops are drawn
from a lattice spread wide enough that no max tie or relu kink sits within
the difference step.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .autograd import Tape, get_rule, gradcheck, registered_ops
from .layers.conv import PadSpec
from .layers.lenet import lenet5_build

CASES: dict[str, Callable] = {}


def case(tag: str):
    def deco(builder):
        CASES[tag] = builder
        return builder

    return deco


def _project(tape: Tape, node, rng_seed: int = 99):
    """Scalar <w, out> with a fixed random w (same w on every call)."""
    shape = tape.value(node).shape
    w = np.random.default_rng(rng_seed).normal(size=shape)
    return tape.record("sum", [tape.record("mul", [node, tape.leaf(w)])])


def _distinct(rng, shape, spread=1.0):
    """Entries pairwise >= 1e-3 * spread apart and away from zero: no ties, no kinks."""
    n = int(np.prod(shape))
    grid = (np.arange(n) - n / 2 + 0.5) * (2.0 * spread / n)
    return rng.permutation(grid).reshape(shape)


def _unary(tag, shape=(3, 4), distinct=False, **attrs):
    def build(rng):
        x = _distinct(rng, shape) if distinct else rng.normal(size=shape)
        return (lambda t, a: _project(t, t.record(tag, [a], **attrs))), [x]

    return build


for _tag in ("negate", "square", "sum", "mean", "sigmoid", "tanh", "softmax", "normalize"):
    case(_tag)(_unary(_tag))
case("relu")(_unary("relu", distinct=True))
case("swish")(_unary("swish", beta=1.7))
case("scalar-mul")(_unary("scalar-mul", c=-2.5))
case("add-const")(_unary("add-const", c=0.75))
case("flatten")(_unary("flatten", shape=(2, 3, 2, 2)))
case("zero-pad")(_unary("zero-pad", shape=(2, 1, 3, 4), pad=PadSpec(1, 2, 0, 1)))
case("maxpool2d")(_unary("maxpool2d", shape=(2, 2, 5, 4), distinct=True, m=2))
case("spatial-max")(_unary("spatial-max", shape=(2, 3, 4, 4), distinct=True))
case("set-max")(_unary("set-max", shape=(2, 3, 4, 4), distinct=True, sets=[[0, 5, 10], [3, 5, 15], [7]]))
case("set-mean")(_unary("set-mean", shape=(2, 3, 4, 4), sets=[[0, 5, 10], [3, 5, 15], [7]]))
case("se2-project-integrate")(_unary("se2-project-integrate", shape=(2, 2, 4, 3, 3)))
case("se2-project-max")(_unary("se2-project-max", shape=(2, 2, 4, 3, 3), distinct=True))


def _binary(tag, sa, sb, **attrs):
    def build(rng):
        return (lambda t, a, b: _project(t, t.record(tag, [a, b], **attrs))), [rng.normal(size=sa),
                                                                              rng.normal(size=sb)]

    return build


for _tag in ("add", "sub", "mul"):
    case(_tag)(_binary(_tag, (3, 4), (3, 4)))
case("matmul")(_binary("matmul", (3, 4), (4, 2)))
case("inner-product")(_binary("inner-product", (5,), (5,)))
case("l2-loss")(_binary("l2-loss", (3, 4), (3, 4)))


@case("copy")
def _copy(rng):
    def fn(t, a):
        u, v = t.record("copy", [a])
        return t.record("add", [_project(t, u, 1), _project(t, t.record("square", [v]), 2)])

    return fn, [rng.normal(size=(3, 2))]


@case("copy3")
def _copy3(rng):
    def fn(t, a):
        u, v, w = t.record("copy3", [a])
        s = t.record("add", [_project(t, u, 1), _project(t, t.record("square", [v]), 2)])
        return t.record("add", [s, _project(t, t.record("tanh", [w]), 3)])

    return fn, [rng.normal(size=(3, 2))]


@case("dense")
def _dense(rng):
    fn = lambda t, x, w, b: _project(t, t.record("dense", [x, w, b]))  # noqa: E731
    return fn, [rng.normal(size=(4, 5)), rng.normal(size=(3, 5)), rng.normal(size=3)]


@case("nll-loss")
def _nll(rng):
    labels = rng.integers(0, 4, size=5)
    return (lambda t, z: t.record("nll-loss", [z], labels=labels)), [rng.normal(size=(5, 4))]


@case("dropout")
def _dropout(rng):
    # fresh generator with a fixed seed inside fn: the same mask on every evaluation
    fn = lambda t, x: _project(t, t.record("dropout", [x], p=0.4, rng=np.random.default_rng(3)))  # noqa: E731
    return fn, [rng.normal(size=(4, 5))]


@case("conv2d-mcc")
def _mcc(rng):
    fn = lambda t, x, k, b: _project(t, t.record("conv2d-mcc", [x, k, b], pad=PadSpec(1, 1, 0, 2)))  # noqa: E731
    return fn, [rng.normal(size=(2, 2, 5, 5)), rng.normal(size=(3, 2, 3, 3)), rng.normal(size=3)]


@case("conv2d-scc")
def _scc(rng):
    fn = lambda t, x, k, a, b: _project(t, t.record("conv2d-scc", [x, k, a, b], pad=PadSpec.same(3)))  # noqa: E731
    return fn, [rng.normal(size=(2, 2, 5, 5)), rng.normal(size=(2, 3, 3)), rng.normal(size=(3, 2)),
                rng.normal(size=3)]


@case("se2-lift")
def _lift(rng):
    fn = lambda t, x, k, a, b: _project(t, t.record("se2-lift", [x, k, a, b], K=8))  # noqa: E731
    return fn, [rng.normal(size=(2, 2, 5, 5)), rng.normal(size=(2, 3, 3)), rng.normal(size=(3, 2)),
                rng.normal(size=3)]


@case("se2-lift-mcc")
def _lift_mcc(rng):
    fn = lambda t, x, k, b: _project(t, t.record("se2-lift-mcc", [x, k, b], K=4))  # noqa: E731
    return fn, [rng.normal(size=(2, 1, 5, 5)), rng.normal(size=(3, 1, 3, 3)), rng.normal(size=3)]


@case("se2-groupconv")
def _gconv(rng):
    fn = lambda t, x, k, a, b: _project(t, t.record("se2-groupconv", [x, k, a, b]))  # noqa: E731
    return fn, [rng.normal(size=(2, 2, 8, 4, 4)), rng.normal(size=(2, 3, 3, 3)), rng.normal(size=(3, 2)),
                rng.normal(size=3)]


@case("se2-groupconv-mcc")
def _gconv_mcc(rng):
    fn = lambda t, x, k, b: _project(t, t.record("se2-groupconv-mcc", [x, k, b]))  # noqa: E731
    return fn, [rng.normal(size=(2, 2, 4, 4, 4)), rng.normal(size=(3, 2, 4, 3, 3)), rng.normal(size=3)]


@case("morph-conv2d")
def _morph(rng):
    fn = lambda t, f, k: _project(t, t.record("morph-conv2d", [f, k], stride=2))  # noqa: E731
    return fn, [_distinct(rng, (2, 7, 7), 5.0), _distinct(rng, (3, 3), 3.0)]


def _network_case(model, x, labels):
    params = model.parameters()

    def fn(t, xid, *pids):
        for p, i in zip(params, pids):
            t.bind(p, i)
        return t.record("nll-loss", [model(t, xid)], labels=labels)

    return fn, [x] + [p.value.copy() for p in params]


@case("net:lenet5")
def _lenet(rng):
    return _network_case(lenet5_build(rng), rng.random((2, 1, 28, 28)), rng.integers(0, 10, size=2))


@case("net:gcnn-k4")
def _gcnn(rng):
    from .gcnn.model import build_gcnn_classifier

    model = build_gcnn_classifier(rng, K=4, widths=(3, 4), lift_m=5, group_m=3)
    return _network_case(model, rng.random((2, 1, 28, 28)), rng.integers(0, 10, size=2))


NETWORK_COORDS = 60


def uncovered_ops() -> list[str]:
    """Differentiable registered ops without a gradient-check case."""
    return [t for t in registered_ops() if get_rule(t).vjp is not None and t not in CASES]


def run_case(tag: str, seed: int = 0, h: float = 1e-6, n_coords: int | None = None) -> float:
    rng = np.random.default_rng(seed)
    fn, inputs = CASES[tag](rng)
    if tag.startswith("net:") and n_coords is None:
        n_coords = NETWORK_COORDS
    return gradcheck(fn, inputs, h=h, n_coords=n_coords, rng=rng, avoid_kinks=True)


def run_all(tags=None, trials: int = 1, h: float = 1e-6) -> dict[str, float]:
    """Worst relative error per case over ``trials`` seeds."""
    tags = list(CASES) if tags is None else list(tags)
    return {tag: max(run_case(tag, seed, h) for seed in range(trials)) for tag in tags}
