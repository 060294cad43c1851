"""Max-plus (tropical) algebra and morphological convolutions.

The semiring is (R u {-inf}, max, +): a (+) b = max(a, b), a (.) b = a + b,
with zero element -inf and unit 0. Kernels use -inf for "no support".
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import total_ordering

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .activations import relu
from .autograd import register
from .errors import ContractError, ShapeError
from .gcnn.group import bin_rotation_matrices
from .gcnn.layers import _angular_extend, _shifted_taps
from .layers.conv import PadSpec
from .tensor import ArrayLike, as_array

NEG_INF = float("-inf")


@total_ordering
@dataclass(frozen=True)
class TropReal:
    """Scalar in the max-plus semiring; ``+`` is max and ``*`` is addition."""

    value: float = NEG_INF

    def __post_init__(self):
        v = float(self.value)
        if np.isnan(v) or v == float("inf"):
            raise ContractError(f"tropical values are reals or -inf, got {v}")
        object.__setattr__(self, "value", v)

    def __add__(self, other: "TropReal") -> "TropReal":
        return TropReal(max(self.value, other.value))

    def __mul__(self, other: "TropReal") -> "TropReal":
        if self.value == NEG_INF or other.value == NEG_INF:
            return TROP_ZERO
        return TropReal(self.value + other.value)

    def __lt__(self, other: "TropReal") -> bool:
        return self.value < other.value


TROP_ZERO = TropReal(NEG_INF)
TROP_ONE = TropReal(0.0)


def trop_add(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    return np.maximum(as_array(a), as_array(b))


def trop_mul(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    # -inf + x is -inf for every finite x and for -inf, so plain addition is the product
    return as_array(a) + as_array(b)


def trop_ops(a, b):
    """(a (+) b, a (.) b) for TropReal scalars or arrays."""
    if isinstance(a, TropReal):
        return a + b, a * b
    return trop_add(a, b), trop_mul(a, b)


# -- morphological convolution ------------------------------------------------------

def _check_kernel(k: np.ndarray) -> None:
    if np.isnan(k).any() or (k == np.inf).any():
        raise ContractError("tropical kernel entries must be reals or -inf")
    if not np.isfinite(k).any():
        raise ContractError("tropical kernel has no finite entry, every window is empty")


def _morph_windows(f: np.ndarray, m: int, stride: int) -> np.ndarray:
    if f.shape[-2] < m or f.shape[-1] < m:
        raise ContractError(f"{m}x{m} kernel has no valid window in a {f.shape[-2:]} input")
    return sliding_window_view(f, (m, m), axis=(-2, -1))[..., ::stride, ::stride, :, :]


def morph_conv2d(kernel: ArrayLike, f: ArrayLike, stride: int = 1) -> np.ndarray:
    """out[i1, i2] = max_j ( kernel[j] + f[i1 s + j1, i2 s + j2] ) over the last two axes of f."""
    k, f = as_array(kernel), as_array(f)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ShapeError(f"tropical kernel must be square, got {k.shape}")
    if stride < 1:
        raise ContractError("stride must be >= 1")
    _check_kernel(k)
    win = _morph_windows(f, k.shape[0], stride)
    return (win + k).max(axis=(-2, -1))


def _morph_fwd(f, k, stride=1):
    _check_kernel(k)
    m = k.shape[0]
    win = _morph_windows(f, m, stride)
    flat = (win + k).reshape(*win.shape[:-2], m * m)
    idx = np.argmax(flat, axis=-1)  # first max wins
    return np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0], (idx, f.shape, m)


def _morph_vjp(saved, g, stride=1):
    idx, shape, m = saved
    j1, j2 = np.divmod(idx, m)
    oh, ow = idx.shape[-2:]
    r = np.arange(oh)[:, None] * stride + j1
    c = np.arange(ow)[None, :] * stride + j2
    gf = np.zeros(shape)
    lead = np.indices(idx.shape[:-2]) if idx.ndim > 2 else ()
    lead = tuple(a[..., None, None] * np.ones((oh, ow), dtype=int) for a in lead)
    np.add.at(gf, lead + (r, c), g)
    gk = np.bincount(idx.ravel(), weights=g.ravel(), minlength=m * m).reshape(m, m)
    return gf, gk


register("morph-conv2d", _morph_fwd, _morph_vjp, arity=2)


def trop_relu_identity(f: ArrayLike) -> np.ndarray:
    """ReLU rebuilt as a tropical operator, checked against :func:`relu`.

    Kernel: 0 on the diagonal (g = h) and -sup f elsewhere, with the
    off-diagonal part also offered at g = h, so
        out(h) = f(h) (+) sup_g ( -sup f (.) f(g) ) = f(h) (+) 0.
    The kernel depends on f itself; this is a verification construction, not
    a layer. The tropically affine form x (+) 0 is compared as well.
    """
    f = as_array(f)
    if not np.isfinite(f).all():
        raise ContractError("trop_relu_identity needs finite input")
    flat = f.ravel()
    if flat.size == 0:
        return f.copy()
    top = flat.max()
    off = np.max(trop_mul(-top, flat))  # exactly 0: top - top
    out = trop_add(flat, off).reshape(f.shape)
    affine = trop_add(f, 0.0)
    ref = relu(f)
    if not (np.array_equal(out, ref) and np.array_equal(affine, ref)):
        raise ContractError("tropical ReLU construction disagrees with relu")
    return out


# -- SE(2) morphological convolution ---------------------------------------------------

def rotate_trop_kernel(kernel: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """Rotate a tropical kernel (..., m, m) by every matrix in ``mats`` -> (..., K, m, m).

    Values are interpolated over finite entries only; a rotated pixel is -inf
    if any contributing source is -inf or falls outside the support.
    """
    m = kernel.shape[-1]
    flat = kernel.reshape(*kernel.shape[:-2], m * m)
    finite = np.isfinite(flat)
    vals = np.einsum("kpq,...q->...kp", mats, np.where(finite, flat, 0.0))
    bad = np.einsum("kpq,...q->...kp", mats, (~finite).astype(float)) > 0
    inside = mats.sum(axis=-1) > 1.0 - 1e-9
    out = np.where(bad | ~inside, NEG_INF, vals)
    return out.reshape(*kernel.shape[:-2], mats.shape[0], m, m)


def morph_conv_se2(kernel: ArrayLike, f: ArrayLike) -> np.ndarray:
    """Max-plus group correlation on K x H x W stacks, same spatial size.

    out[k] = max_{k', j} ( rot(kernel[(k' - k) mod K], theta_k)[j] + f[k'][. + j] ),
    with the input padded by -inf. Short kernels (K_k < K taps) are centred and
    extended with -inf like the linear group convolution.
    """
    k, f = as_array(kernel), as_array(f)
    if f.ndim != 3 or k.ndim != 3 or k.shape[-1] != k.shape[-2]:
        raise ShapeError(f"expected K_k x m x m kernel and K x H x W input, got {k.shape} and {f.shape}")
    K, m = f.shape[0], k.shape[-1]
    if m % 2 == 0:
        raise ShapeError(f"kernel size must be odd, got {m}")
    _check_kernel(k)
    if k.shape[0] > K:
        raise ShapeError(f"kernel has {k.shape[0]} angular taps but the input only {K}")
    full = _angular_extend(k, K)
    if k.shape[0] < K:
        missing = np.ones(K, bool)
        missing[(np.arange(k.shape[0]) - k.shape[0] // 2) % K] = False
        full[missing] = NEG_INF
    taps = _shifted_taps(full)  # k, k', m, m
    mats = bin_rotation_matrices(m, K)
    stack = np.empty_like(taps)
    for i in range(K):
        stack[i] = rotate_trop_kernel(taps[i], mats[i : i + 1])[:, 0]
    pad = PadSpec.same(m)
    fp = np.pad(f, [(0, 0), (pad.top, pad.bottom), (pad.left, pad.right)], constant_values=NEG_INF)
    win = sliding_window_view(fp, (m, m), axis=(-2, -1))  # k', H, W, m, m
    out = np.full(f.shape, NEG_INF)
    for i in range(K):
        for j in range(K):
            if np.isfinite(stack[i, j]).any():
                out[i] = np.maximum(out[i], (win[j] + stack[i, j]).max(axis=(-2, -1)))
    return out
