"""Trainable layers and a minimal sequential container.

Layers hold :class:`Parameter` objects; ``forward(tape, x)`` records the
layer's computation on a tape and returns the output node. Parameters become
tape leaves through :meth:`Tape.param`, so gradients come back keyed by node.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..activations import apply_recorded
from ..autograd import NodeId, Tape
from ..errors import ShapeError
from ..tensor import ArrayLike, as_array
from .conv import PadSpec, depthwise_core, mcc_core, zero_pad2d


class Parameter:
    __slots__ = ("name", "value")

    def __init__(self, name: str, value: ArrayLike):
        self.name = name
        self.value = np.array(as_array(value), dtype=np.float64)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


class Module:
    """Anything with named parameters and a recorded forward pass."""

    def parameters(self) -> list[Parameter]:
        out = []
        for v in vars(self).values():
            if isinstance(v, Parameter):
                out.append(v)
            elif isinstance(v, Module):
                out.extend(v.parameters())
            elif isinstance(v, (list, tuple)):
                for item in v:
                    if isinstance(item, Module):
                        out.extend(item.parameters())
        return out

    def named_parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def n_parameters(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def forward(self, tape: Tape, x: NodeId) -> NodeId:
        raise NotImplementedError

    def __call__(self, tape: Tape, x: NodeId) -> NodeId:
        return self.forward(tape, x)

    def predict(self, x: ArrayLike) -> np.ndarray:
        """Forward pass on a batch without keeping the tape."""
        tape = Tape()
        return tape.value(self.forward(tape, tape.leaf(x))).numpy()


class Sequential(Module):
    def __init__(self, *layers: Module):
        self.layers = list(layers)

    def forward(self, tape, x):
        for layer in self.layers:
            x = layer(tape, x)
        return x

    def trace_shapes(self, x: ArrayLike) -> list[tuple[int, ...]]:
        """Per-sample output shape after every layer for a batch ``x``."""
        tape = Tape()
        node = tape.leaf(x)
        shapes = []
        for layer in self.layers:
            node = layer(tape, node)
            shapes.append(tape.value(node).shape[1:])
        return shapes


class Lambda(Module):
    """Parameter-free recorded op, e.g. ``Lambda("maxpool2d", m=2)``."""

    def __init__(self, op: str, **attrs):
        self.op = op
        self.attrs = attrs

    def forward(self, tape, x):
        return tape.record(self.op, [x], **self.attrs)


class Activation(Module):
    def __init__(self, kind):
        self.kind = kind

    def forward(self, tape, x):
        return apply_recorded(tape, x, self.kind)


class DenseLayer(Module):
    """y = act(x A^T + b) on a batch of row vectors."""

    def __init__(self, A: ArrayLike, b: ArrayLike, act="identity", name: str = "dense"):
        A, b = as_array(A), as_array(b)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise ShapeError(f"dense layer needs A (m, n) and b (m,), got {A.shape} and {b.shape}")
        self.A = Parameter(f"{name}.A", A)
        self.b = Parameter(f"{name}.b", b)
        self.act = act

    @property
    def fan_in(self):
        return self.A.shape[1]

    @property
    def fan_out(self):
        return self.A.shape[0]

    def forward(self, tape, x):
        y = tape.record("dense", [x, tape.param(self.A), tape.param(self.b)])
        return apply_recorded(tape, y, self.act)


class Conv2DLayer(Module):
    """Square-kernel cross-correlation layer in single- or multi-channel form.

    SCC: one kernel per input channel (``kernels`` is C x m x m) followed by a
    C' x C mixing matrix. MCC: one kernel per (output, input) pair
    (``kernels`` is C' x C x m x m). The bias is per output channel, added
    after mixing and before the activation.
    """

    def __init__(self, mode: str, kernels: ArrayLike, bias: ArrayLike, mix: Optional[ArrayLike] = None,
                 pad: PadSpec = PadSpec(), act="identity", name: str = "conv"):
        kernels, bias = as_array(kernels), as_array(bias)
        if mode not in ("SCC", "MCC"):
            raise ValueError(f"mode must be SCC or MCC, got {mode!r}")
        if kernels.shape[-1] != kernels.shape[-2]:
            raise ShapeError(f"kernels must be square, got {kernels.shape}")
        if mode == "SCC":
            if mix is None:
                raise ShapeError("SCC layer needs a mixing matrix")
            mix = as_array(mix)
            if kernels.ndim != 3 or mix.shape[1] != kernels.shape[0]:
                raise ShapeError(f"SCC kernels {kernels.shape} and mix {mix.shape} disagree")
            c_out = mix.shape[0]
        else:
            if kernels.ndim != 4 or mix is not None:
                raise ShapeError("MCC layer needs a C' x C x m x m kernel stack and no mixing matrix")
            c_out = kernels.shape[0]
        if bias.shape != (c_out,):
            raise ShapeError(f"bias must have shape ({c_out},), got {bias.shape}")
        self.mode = mode
        self.kernels = Parameter(f"{name}.k", kernels)
        self.mix = Parameter(f"{name}.A", mix) if mode == "SCC" else None
        self.bias = Parameter(f"{name}.b", bias)
        self.pad = pad
        self.act = act

    @property
    def m(self) -> int:
        return self.kernels.shape[-1]

    @property
    def in_channels(self) -> int:
        return self.kernels.shape[0] if self.mode == "SCC" else self.kernels.shape[1]

    @property
    def out_channels(self) -> int:
        return self.bias.shape[0]

    def weight_count(self) -> int:
        """Trainable weights excluding the bias: C m^2 + C' C (SCC) or C' C m^2 (MCC)."""
        n = self.kernels.value.size
        return n + (self.mix.value.size if self.mix is not None else 0)

    def forward(self, tape, x):
        if self.mode == "SCC":
            y = tape.record("conv2d-scc", [x, tape.param(self.kernels), tape.param(self.mix),
                                           tape.param(self.bias)], pad=self.pad)
        else:
            y = tape.record("conv2d-mcc", [x, tape.param(self.kernels), tape.param(self.bias)], pad=self.pad)
        return apply_recorded(tape, y, self.act)


def _as_batch(f: np.ndarray, layer: Conv2DLayer) -> np.ndarray:
    if f.ndim != 3 or f.shape[0] != layer.in_channels:
        raise ShapeError(f"expected a {layer.in_channels} x h x w input, got {f.shape}")
    f = zero_pad2d(f, layer.pad)
    return f[None]


def scc_forward(layer: Conv2DLayer, f: ArrayLike) -> np.ndarray:
    """SCC(f)[c', i] = sum_c A[c', c] (k[c] * f[c])[i] + b[c'] (no activation)."""
    if layer.mode != "SCC":
        raise ShapeError("layer is not in SCC mode")
    z = depthwise_core(_as_batch(as_array(f), layer), layer.kernels.value)[0]
    return np.einsum("dc,chw->dhw", layer.mix.value, z) + layer.bias.value[:, None, None]


def mcc_forward(layer: Conv2DLayer, f: ArrayLike) -> np.ndarray:
    """MCC(f)[c', i] = sum_c (k[c', c] * f[c])[i] + b[c'] (no activation)."""
    if layer.mode != "MCC":
        raise ShapeError("layer is not in MCC mode")
    return mcc_core(_as_batch(as_array(f), layer), layer.kernels.value)[0] + layer.bias.value[:, None, None]


def scc_to_mcc(layer: Conv2DLayer) -> Conv2DLayer:
    """Equivalent MCC layer with kernels k'[c', c] = A[c', c] k[c]."""
    if layer.mode != "SCC":
        raise ShapeError("layer is not in SCC mode")
    k = layer.mix.value[:, :, None, None] * layer.kernels.value[None]
    return Conv2DLayer("MCC", k, layer.bias.value.copy(), pad=layer.pad, act=layer.act)
