"""Cross-correlation, zero padding and max pooling.

"Convolution" in the trainable layers is cross-correlation; :func:`conv1d`
only exists to show the kernel-reflection relationship. Kernels are square.

The batched cores operate on ``(N, C, H, W)`` arrays through an im2col view
(``sliding_window_view``); the public single-image functions wrap them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..autograd import register
from ..errors import ShapeError
from ..tensor import ArrayLike, as_array


@dataclass(frozen=True)
class PadSpec:
    top: int = 0
    bottom: int = 0
    left: int = 0
    right: int = 0

    def __post_init__(self):
        if min(self.top, self.bottom, self.left, self.right) < 0:
            raise ShapeError("padding must be non-negative")

    @classmethod
    def same(cls, m: int) -> "PadSpec":
        """Padding that keeps an ``m x m`` cross-correlation shape-preserving."""
        lo, hi = (m - 1) // 2, m // 2
        return cls(lo, hi, lo, hi)

    @property
    def is_zero(self) -> bool:
        return self.top == self.bottom == self.left == self.right == 0


# -- 1D ---------------------------------------------------------------------------

def xcorr1d(k: ArrayLike, f: ArrayLike) -> np.ndarray:
    k, f = as_array(k), as_array(f)
    m, n = k.size, f.size
    if m > n:
        raise ShapeError(f"kernel of length {m} longer than signal of length {n}")
    return sliding_window_view(f, m) @ k


def conv1d(k: ArrayLike, f: ArrayLike) -> np.ndarray:
    return xcorr1d(as_array(k)[::-1], f)


# -- 2D single image ---------------------------------------------------------------

def xcorr2d(k: ArrayLike, f: ArrayLike) -> np.ndarray:
    k, f = as_array(k), as_array(f)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ShapeError(f"kernel must be square, got {k.shape}")
    m = k.shape[0]
    if f.ndim != 2 or f.shape[0] < m or f.shape[1] < m:
        raise ShapeError(f"{m}x{m} kernel does not fit input of shape {f.shape}")
    return np.tensordot(sliding_window_view(f, (m, m)), k, axes=([2, 3], [0, 1]))


def zero_pad2d(f: ArrayLike, pad: PadSpec) -> np.ndarray:
    """Zero-pad the last two axes."""
    f = as_array(f)
    widths = [(0, 0)] * (f.ndim - 2) + [(pad.top, pad.bottom), (pad.left, pad.right)]
    return np.pad(f, widths)


def _crop(x: np.ndarray, pad: PadSpec) -> np.ndarray:
    h, w = x.shape[-2:]
    return x[..., pad.top : h - pad.bottom, pad.left : w - pad.right]


def _blocks(f: np.ndarray, m: int) -> np.ndarray:
    """View the last two axes as (H//m, W//m, m*m) blocks; ragged edges dropped."""
    h, w = f.shape[-2] // m, f.shape[-1] // m
    lead = f.shape[:-2]
    cropped = f[..., : h * m, : w * m].reshape(*lead, h, m, w, m)
    return np.moveaxis(cropped, -3, -2).reshape(*lead, h, w, m * m)


def maxpool2d(f: ArrayLike, m: int) -> np.ndarray:
    """Non-overlapping m x m max pooling over the last two axes (stride m)."""
    if m < 1:
        raise ShapeError("pool size must be >= 1")
    f = as_array(f)
    if f.shape[-2] < m or f.shape[-1] < m:
        raise ShapeError(f"pool size {m} larger than input {f.shape[-2:]}")
    return _blocks(f, m).max(axis=-1)


# -- batched cores ----------------------------------------------------------------

def _windows(x: np.ndarray, m: int) -> np.ndarray:
    return sliding_window_view(x, (m, m), axis=(-2, -1))


def mcc_core(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """out[n,d] = sum_c k[d,c] * x[n,c]  (x: N,C,H,W; k: D,C,m,m)."""
    n, c, h, w = x.shape
    d, c2, m, m2 = k.shape
    if c != c2 or m != m2:
        raise ShapeError(f"kernel stack {k.shape} does not match input {x.shape}")
    if h < m or w < m:
        raise ShapeError(f"{m}x{m} kernel does not fit {h}x{w} input")
    out = np.tensordot(_windows(x, m), k, axes=([1, 4, 5], [1, 2, 3]))  # N,H',W',D
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def mcc_core_grads(x: np.ndarray, k: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = k.shape[-1]
    gk = np.tensordot(g, _windows(x, m), axes=([0, 2, 3], [0, 2, 3]))  # D,C,m,m
    d, c = k.shape[:2]
    if c < d:
        # contract over output channels first, then scatter the m^2 shifts (col2im)
        cols = np.tensordot(g, k, axes=([1], [0]))  # N,H',W',C,m,m
        gx = np.zeros(x.shape)
        hh, ww = g.shape[2:]
        for i in range(m):
            for j in range(m):
                gx[:, :, i : i + hh, j : j + ww] += cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return gx, gk
    gp = np.pad(g, [(0, 0), (0, 0), (m - 1, m - 1), (m - 1, m - 1)])
    gx = np.tensordot(_windows(gp, m), k[:, :, ::-1, ::-1], axes=([1, 4, 5], [0, 2, 3]))  # N,H,W,C
    return np.ascontiguousarray(gx.transpose(0, 3, 1, 2)), gk


def depthwise_core(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """out[n,c] = k[c] * x[n,c]  (x: N,C,H,W; k: C,m,m)."""
    if x.shape[1] != k.shape[0] or k.shape[1] != k.shape[2]:
        raise ShapeError(f"kernels {k.shape} do not match input {x.shape}")
    m = k.shape[-1]
    if x.shape[2] < m or x.shape[3] < m:
        raise ShapeError(f"{m}x{m} kernel does not fit {x.shape[2:]} input")
    return np.einsum("nchwij,cij->nchw", _windows(x, m), k, optimize=True)


def depthwise_core_grads(x: np.ndarray, k: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = k.shape[-1]
    gk = np.einsum("nchwij,nchw->cij", _windows(x, m), g, optimize=True)
    gp = np.pad(g, [(0, 0), (0, 0), (m - 1, m - 1), (m - 1, m - 1)])
    gx = np.einsum("nchwij,cij->nchw", _windows(gp, m), k[:, ::-1, ::-1], optimize=True)
    return gx, gk


# -- recorded ops ------------------------------------------------------------------

def _pad_fwd(x, pad):
    return zero_pad2d(x, pad), ()


register("zero-pad", _pad_fwd, lambda saved, g, pad: (_crop(g, pad),), arity=1)


def _mcc_fwd(x, k, b, pad=PadSpec()):
    xp = x if pad.is_zero else zero_pad2d(x, pad)
    y = mcc_core(xp, k) + b[None, :, None, None]
    return y, (xp, k)


def _mcc_vjp(saved, g, pad=PadSpec()):
    xp, k = saved
    gx, gk = mcc_core_grads(xp, k, g)
    return _crop(gx, pad), gk, g.sum(axis=(0, 2, 3))


register("conv2d-mcc", _mcc_fwd, _mcc_vjp, arity=3)


def _scc_fwd(x, k, a, b, pad=PadSpec()):
    xp = x if pad.is_zero else zero_pad2d(x, pad)
    z = depthwise_core(xp, k)
    y = np.einsum("dc,nchw->ndhw", a, z, optimize=True) + b[None, :, None, None]
    return y, (xp, k, a, z)


def _scc_vjp(saved, g, pad=PadSpec()):
    xp, k, a, z = saved
    ga = np.einsum("ndhw,nchw->dc", g, z, optimize=True)
    gz = np.einsum("dc,ndhw->nchw", a, g, optimize=True)
    gx, gk = depthwise_core_grads(xp, k, gz)
    return _crop(gx, pad), gk, ga, g.sum(axis=(0, 2, 3))


register("conv2d-scc", _scc_fwd, _scc_vjp, arity=4)


def _route_max(x_blocks: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Send each output gradient to the first maximal entry of its block."""
    idx = np.argmax(x_blocks, axis=-1)
    out = np.zeros_like(x_blocks)
    np.put_along_axis(out, idx[..., None], g[..., None], axis=-1)
    return out


def _unblock(blocks: np.ndarray, m: int, shape: tuple) -> np.ndarray:
    lead = blocks.shape[:-3]
    h, w = blocks.shape[-3], blocks.shape[-2]
    full = np.zeros(shape)
    b = blocks.reshape(*lead, h, w, m, m)
    full[..., : h * m, : w * m] = np.moveaxis(b, -2, -3).reshape(*lead, h * m, w * m)
    return full


def _maxpool_fwd(x, m):
    bl = _blocks(x, m)
    return bl.max(axis=-1), (bl, x.shape)


def _maxpool_vjp(saved, g, m):
    bl, shape = saved
    return (_unblock(_route_max(bl, g), m, shape),)


register("maxpool2d", _maxpool_fwd, _maxpool_vjp, arity=1)


def _spatial_max_fwd(x):
    flat = x.reshape(*x.shape[:-2], -1)
    return flat.max(axis=-1), (flat, x.shape)


def _spatial_max_vjp(saved, g):
    flat, shape = saved
    return (_route_max(flat, g).reshape(shape),)


register("spatial-max", _spatial_max_fwd, _spatial_max_vjp, arity=1)


def _set_max_fwd(x, sets):
    """Max over index sets of the flattened last two axes: (..., H, W) -> (..., len(sets))."""
    flat = x.reshape(*x.shape[:-2], -1)
    outs, args = [], []
    for s in sets:
        sub = flat[..., list(s)]
        i = np.argmax(sub, axis=-1)
        outs.append(np.take_along_axis(sub, i[..., None], axis=-1)[..., 0])
        args.append(np.asarray(s)[i])
    return np.stack(outs, axis=-1), (np.stack(args, axis=-1), x.shape)


def _set_max_vjp(saved, g, sets):
    idx, shape = saved
    rows = int(np.prod(shape[:-2], dtype=int))
    out = np.zeros((rows, shape[-2] * shape[-1]))
    # sets may overlap, so accumulate rather than assign
    np.add.at(out, (np.arange(rows)[:, None], idx.reshape(rows, -1)), g.reshape(rows, -1))
    return (out.reshape(shape),)


register("set-max", _set_max_fwd, _set_max_vjp, arity=1)


def _set_mean_fwd(x, sets):
    """Mean over index sets of the flattened last two axes."""
    flat = x.reshape(*x.shape[:-2], -1)
    return np.stack([flat[..., list(s)].mean(axis=-1) for s in sets], axis=-1), x.shape


def _set_mean_vjp(shape, g, sets):
    out = np.zeros((*shape[:-2], shape[-2] * shape[-1]))
    for j, s in enumerate(sets):
        out[..., list(s)] += g[..., j : j + 1] / len(s)
    return (out.reshape(shape),)


register("set-mean", _set_mean_fwd, _set_mean_vjp, arity=1)
