"""Modernized LeNet-5 for 1 x 28 x 28 inputs.

conv 5x5 (same padding, 6 ch) -> relu -> maxpool 2 -> conv 5x5 (valid, 16 ch)
-> relu -> maxpool 2 -> flatten (400) -> dense 120 -> relu -> dense 84 -> relu
-> dense 10 (logits). Both convolutions are in multi-channel form.
"""
from __future__ import annotations

import numpy as np

from ..initializers import sample_bias, sample_params, scheme_for
from .conv import PadSpec
from .module import Conv2DLayer, DenseLayer, Lambda, Sequential

LENET_STAGE_SHAPES = [(6, 28, 28), (6, 14, 14), (16, 10, 10), (16, 5, 5), (400,), (120,), (84,), (10,)]


def _conv(name, c_in, c_out, m, pad, init, rng):
    scheme = scheme_for(init, c_in * m * m, c_out * m * m)
    return Conv2DLayer("MCC", sample_params(scheme, (c_out, c_in, m, m), rng),
                       sample_bias(scheme, (c_out,), rng), pad=pad, act="relu", name=name)


def _dense(name, n, m, act, init, rng):
    scheme = scheme_for(init, n, m)
    return DenseLayer(sample_params(scheme, (m, n), rng), sample_bias(scheme, (m,), rng), act=act, name=name)


def lenet5_build(rng: np.random.Generator, init: str = "xavier") -> Sequential:
    return Sequential(
        _conv("conv1", 1, 6, 5, PadSpec.same(5), init, rng),
        Lambda("maxpool2d", m=2),
        _conv("conv2", 6, 16, 5, PadSpec(), init, rng),
        Lambda("maxpool2d", m=2),
        Lambda("flatten"),
        _dense("fc1", 400, 120, "relu", init, rng),
        _dense("fc2", 120, 84, "relu", init, rng),
        _dense("fc3", 84, 10, "identity", init, rng),
    )
