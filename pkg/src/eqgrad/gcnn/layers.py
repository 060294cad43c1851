"""Lifting, group-convolution and projection layers on discretized SE(2).

Feature maps on the group are arrays ``(N, C, K, H, W)``: channel, orientation
bin theta_k = 2 pi k / K, row, column. Spatial padding is "same" throughout, so
H and W are preserved, and kernels must have odd size.

Lifting correlates the input with every rotated copy of the kernel:
    out[c', k] = sum_c a[c', c] (rot(kappa_c, theta_k) * f_c) + b[c']
Group convolution rotates each angular tap of the kernel by theta_k and shifts
it cyclically along the angle axis:
    out[c', k] = sum_c a[c', c] sum_k' rot(kappa_c[k' - k], theta_k) * f[c, k'] + b[c']
Both have an MCC form with one kernel per (output, input) channel pair instead
of the per-channel kernel plus mixing matrix. Biases do not depend on theta.
"""
from __future__ import annotations

import math

import numpy as np

from ..activations import apply_recorded
from ..autograd import register
from ..errors import ShapeError
from ..layers.conv import PadSpec, _crop, mcc_core, mcc_core_grads, zero_pad2d
from ..layers.module import Module, Parameter
from ..tensor import ArrayLike, as_array
from .group import bin_rotation_matrices


def _rotate_bins(kernels: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """(..., m, m) -> (..., K, m, m): every kernel rotated to every orientation bin."""
    m = kernels.shape[-1]
    flat = kernels.reshape(*kernels.shape[:-2], m * m)
    out = np.einsum("kpq,...q->...kp", mats, flat)
    return out.reshape(*kernels.shape[:-2], mats.shape[0], m, m)


def _rotate_bins_T(g: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`_rotate_bins`, summed over bins."""
    m = g.shape[-1]
    flat = g.reshape(*g.shape[:-2], m * m)
    return np.einsum("kpq,...kp->...q", mats, flat).reshape(*g.shape[:-3], m, m)


def _angular_extend(kernels: np.ndarray, K: int) -> np.ndarray:
    """Zero-extend a group kernel with K_k < K angular taps to K taps.

    Full-support kernels are used as given (tap j = angular offset j). A short
    kernel's taps are centred: tap j sits at offset j - K_k // 2 (mod K).
    """
    kk = kernels.shape[-3]
    if kk == K:
        return kernels
    if kk > K:
        raise ShapeError(f"group kernel has {kk} angular taps but the input only {K} orientations")
    full = np.zeros(kernels.shape[:-3] + (K,) + kernels.shape[-2:])
    offsets = (np.arange(kk) - kk // 2) % K
    full[..., offsets, :, :] = kernels
    return full


def _angular_restrict(g: np.ndarray, kk: int) -> np.ndarray:
    K = g.shape[-3]
    if kk == K:
        return g
    offsets = (np.arange(kk) - kk // 2) % K
    return g[..., offsets, :, :]


def _shifted_taps(kernels: np.ndarray) -> np.ndarray:
    """(..., K, m, m) -> (..., K_out, K_in, m, m) with entry [k, k'] = kernels[(k' - k) mod K]."""
    K = kernels.shape[-3]
    idx = (np.arange(K)[None, :] - np.arange(K)[:, None]) % K
    return kernels[..., idx, :, :]


def _shifted_taps_T(g: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`_shifted_taps`."""
    K = g.shape[-3]
    out = np.zeros(g.shape[:-4] + (K,) + g.shape[-2:])
    for k in range(K):
        out += np.roll(g[..., k, :, :, :], -k, axis=-3)
    return out


def group_kernel_stack(kernels: np.ndarray, K: int) -> np.ndarray:
    """Full (..., K_out, K_in, m, m) stack: tap k' - k rotated by theta_k."""
    m = kernels.shape[-1]
    mats = bin_rotation_matrices(m, K)
    taps = _shifted_taps(_angular_extend(kernels, K))  # ..., k, k', m, m
    flat = taps.reshape(*taps.shape[:-2], m * m)
    rot = np.einsum("kpq,...kjq->...kjp", mats, flat)
    return rot.reshape(taps.shape)


def _group_kernel_stack_T(g: np.ndarray, kk: int) -> np.ndarray:
    K, m = g.shape[-3], g.shape[-1]
    mats = bin_rotation_matrices(m, K)
    flat = g.reshape(*g.shape[:-2], m * m)
    unrot = np.einsum("kpq,...kjp->...kjq", mats, flat).reshape(g.shape)
    return _angular_restrict(_shifted_taps_T(unrot), kk)


# -- lifting --------------------------------------------------------------------------

def _lift_mcc_fwd(x, kernels, bias, K):
    n, c, h, w = x.shape
    d, c2, m, _ = kernels.shape
    if c != c2:
        raise ShapeError(f"lifting kernels {kernels.shape} do not match input {x.shape}")
    mats = bin_rotation_matrices(m, K)
    stack = _rotate_bins(kernels, mats)  # d, c, K, m, m
    stack = stack.transpose(0, 2, 1, 3, 4).reshape(d * K, c, m, m)
    pad = PadSpec.same(m)
    xp = zero_pad2d(x, pad)
    y = mcc_core(xp, stack).reshape(n, d, K, h, w) + bias[None, :, None, None, None]
    return y, (xp, stack, mats)


def _lift_mcc_vjp(saved, g, K):
    xp, stack, mats = saved
    n, d, _, h, w = g.shape
    c, m = stack.shape[1], stack.shape[-1]
    gx, gstack = mcc_core_grads(xp, stack, g.reshape(n, d * K, h, w))
    gstack = gstack.reshape(d, K, c, m, m).transpose(0, 2, 1, 3, 4)
    gk = _rotate_bins_T(gstack, mats)
    return _crop(gx, PadSpec.same(m)), gk, g.sum(axis=(0, 2, 3, 4))


register("se2-lift-mcc", _lift_mcc_fwd, _lift_mcc_vjp, arity=3)


def _lift_scc_fwd(x, kernels, mix, bias, K):
    n, c, h, w = x.shape
    if kernels.ndim != 3 or kernels.shape[0] != c or mix.shape[1] != c:
        raise ShapeError(f"lifting kernels {kernels.shape} / mix {mix.shape} do not match input {x.shape}")
    m = kernels.shape[-1]
    mats = bin_rotation_matrices(m, K)
    stack = _rotate_bins(kernels, mats)  # c, K, m, m
    pad = PadSpec.same(m)
    xp = zero_pad2d(x, pad)
    z = np.empty((n, c, K, h, w))
    for j in range(c):
        z[:, j] = mcc_core(xp[:, j : j + 1], stack[j][:, None])
    y = np.einsum("dc,nckhw->ndkhw", mix, z, optimize=True) + bias[None, :, None, None, None]
    return y, (xp, stack, mats, mix, z)


def _lift_scc_vjp(saved, g, K):
    xp, stack, mats, mix, z = saved
    c, m = stack.shape[0], stack.shape[-1]
    gmix = np.einsum("ndkhw,nckhw->dc", g, z, optimize=True)
    gz = np.einsum("dc,ndkhw->nckhw", mix, g, optimize=True)
    gx = np.empty_like(xp)
    gstack = np.empty_like(stack)
    for j in range(c):
        gxj, gsj = mcc_core_grads(xp[:, j : j + 1], stack[j][:, None], gz[:, j])
        gx[:, j] = gxj[:, 0]
        gstack[j] = gsj[:, 0]
    gk = _rotate_bins_T(gstack, mats)
    return _crop(gx, PadSpec.same(m)), gk, gmix, g.sum(axis=(0, 2, 3, 4))


register("se2-lift", _lift_scc_fwd, _lift_scc_vjp, arity=4)


# -- group convolution ---------------------------------------------------------------

def _gconv_scc_fwd(x, kernels, mix, bias):
    n, c, K, h, w = x.shape
    if kernels.ndim != 4 or kernels.shape[0] != c or mix.shape[1] != c:
        raise ShapeError(f"group kernels {kernels.shape} / mix {mix.shape} do not match input {x.shape}")
    m = kernels.shape[-1]
    stack = group_kernel_stack(kernels, K)  # c, K, K, m, m
    pad = PadSpec.same(m)
    xp = zero_pad2d(x, pad)
    z = np.empty((n, c, K, h, w))
    for j in range(c):
        z[:, j] = mcc_core(xp[:, j], stack[j])
    y = np.einsum("dc,nckhw->ndkhw", mix, z, optimize=True) + bias[None, :, None, None, None]
    return y, (xp, stack, mix, z, kernels.shape[1])


def _gconv_scc_vjp(saved, g):
    xp, stack, mix, z, kk = saved
    c, m = stack.shape[0], stack.shape[-1]
    gmix = np.einsum("ndkhw,nckhw->dc", g, z, optimize=True)
    gz = np.einsum("dc,ndkhw->nckhw", mix, g, optimize=True)
    gx = np.empty_like(xp)
    gstack = np.empty_like(stack)
    for j in range(c):
        gx[:, j], gstack[j] = mcc_core_grads(xp[:, j], stack[j], gz[:, j])
    gk = _group_kernel_stack_T(gstack, kk)
    return _crop(gx, PadSpec.same(m)), gk, gmix, g.sum(axis=(0, 2, 3, 4))


register("se2-groupconv", _gconv_scc_fwd, _gconv_scc_vjp, arity=4)


def _gconv_mcc_fwd(x, kernels, bias):
    n, c, K, h, w = x.shape
    if kernels.ndim != 5 or kernels.shape[1] != c:
        raise ShapeError(f"group kernels {kernels.shape} do not match input {x.shape}")
    d, m = kernels.shape[0], kernels.shape[-1]
    stack = group_kernel_stack(kernels, K)  # d, c, K, K, m, m
    stack = stack.transpose(0, 2, 1, 3, 4, 5).reshape(d * K, c * K, m, m)
    pad = PadSpec.same(m)
    xp = zero_pad2d(x.reshape(n, c * K, h, w), pad)
    y = mcc_core(xp, stack).reshape(n, d, K, h, w) + bias[None, :, None, None, None]
    return y, (xp, stack, kernels.shape)


def _gconv_mcc_vjp(saved, g):
    xp, stack, kshape = saved
    d, c, kk, m, _ = kshape
    n, _, K, h, w = g.shape
    gx, gstack = mcc_core_grads(xp, stack, g.reshape(n, d * K, h, w))
    gstack = gstack.reshape(d, K, c, K, m, m).transpose(0, 2, 1, 3, 4, 5)
    gk = _group_kernel_stack_T(gstack, kk)
    gx = _crop(gx, PadSpec.same(m)).reshape(n, c, K, h, w)
    return gx, gk, g.sum(axis=(0, 2, 3, 4))


register("se2-groupconv-mcc", _gconv_mcc_fwd, _gconv_mcc_vjp, arity=3)


# -- projections ----------------------------------------------------------------------

def _proj_int_fwd(x, scaled=True):
    K = x.shape[-3]
    c = 2 * math.pi / K if scaled else 1.0
    return c * x.sum(axis=-3), (K, c)


def _proj_int_vjp(saved, g, scaled=True):
    K, c = saved
    return (np.repeat(np.expand_dims(c * g, -3), K, axis=-3),)


register("se2-project-integrate", _proj_int_fwd, _proj_int_vjp, arity=1)


def _proj_max_fwd(x):
    idx = np.argmax(x, axis=-3)
    return np.max(x, axis=-3), (idx, x.shape)


def _proj_max_vjp(saved, g):
    idx, shape = saved
    out = np.zeros(shape)
    np.put_along_axis(out, np.expand_dims(idx, -3), np.expand_dims(g, -3), axis=-3)
    return (out,)


register("se2-project-max", _proj_max_fwd, _proj_max_vjp, arity=1)


def project_integrate(f: ArrayLike, scaled: bool = True) -> np.ndarray:
    """Riemann sum of the integral over theta: (2 pi / K) sum_k f[..., k, :, :]."""
    return _proj_int_fwd(as_array(f), scaled)[0]


def project_max(f: ArrayLike) -> np.ndarray:
    return np.max(as_array(f), axis=-3)


# -- layers --------------------------------------------------------------------------

class LiftLayer(Module):
    """R^2 -> SE(2) layer. SCC: kernels (C, m, m) + mix (C', C); MCC: kernels (C', C, m, m)."""

    def __init__(self, kernels: ArrayLike, bias: ArrayLike, K: int, mix: ArrayLike | None = None,
                 act="identity", name: str = "lift"):
        kernels = as_array(kernels)
        if kernels.shape[-1] % 2 == 0 or kernels.shape[-1] != kernels.shape[-2]:
            raise ShapeError(f"lifting kernels must be square with odd size, got {kernels.shape}")
        self.mode = "SCC" if mix is not None else "MCC"
        self.kernels = Parameter(f"{name}.k", kernels)
        self.mix = Parameter(f"{name}.A", mix) if mix is not None else None
        self.bias = Parameter(f"{name}.b", bias)
        self.K = int(K)
        self.act = act

    def forward(self, tape, x):
        if self.mode == "SCC":
            y = tape.record("se2-lift", [x, tape.param(self.kernels), tape.param(self.mix), tape.param(self.bias)],
                            K=self.K)
        else:
            y = tape.record("se2-lift-mcc", [x, tape.param(self.kernels), tape.param(self.bias)], K=self.K)
        return apply_recorded(tape, y, self.act)


class GroupConvLayer(Module):
    """SE(2) -> SE(2) layer. SCC: kernels (C, K_k, m, m) + mix; MCC: kernels (C', C, K_k, m, m)."""

    def __init__(self, kernels: ArrayLike, bias: ArrayLike, mix: ArrayLike | None = None,
                 act="identity", name: str = "gconv"):
        kernels = as_array(kernels)
        if kernels.shape[-1] % 2 == 0 or kernels.shape[-1] != kernels.shape[-2]:
            raise ShapeError(f"group kernels must be square with odd size, got {kernels.shape}")
        self.mode = "SCC" if mix is not None else "MCC"
        self.kernels = Parameter(f"{name}.k", kernels)
        self.mix = Parameter(f"{name}.A", mix) if mix is not None else None
        self.bias = Parameter(f"{name}.b", bias)
        self.act = act

    def forward(self, tape, x):
        if self.mode == "SCC":
            y = tape.record("se2-groupconv",
                            [x, tape.param(self.kernels), tape.param(self.mix), tape.param(self.bias)])
        else:
            y = tape.record("se2-groupconv-mcc", [x, tape.param(self.kernels), tape.param(self.bias)])
        return apply_recorded(tape, y, self.act)


class ProjectLayer(Module):
    def __init__(self, how: str = "max", scaled: bool = True):
        if how not in ("max", "integrate"):
            raise ValueError(f"projection must be 'max' or 'integrate', got {how!r}")
        self.how = how
        self.scaled = scaled

    def forward(self, tape, x):
        if self.how == "max":
            return tape.record("se2-project-max", [x])
        return tape.record("se2-project-integrate", [x], scaled=self.scaled)


def _single(layer: Module, f: np.ndarray) -> np.ndarray:
    from ..autograd import Tape

    tape = Tape()
    return tape.value(layer.forward(tape, tape.leaf(f[None]))).data[0].copy()


def lift_forward(layer: LiftLayer, f: ArrayLike, K: int | None = None) -> np.ndarray:
    """Lift one C x H x W image to C' x K x H x W (activation included)."""
    f = as_array(f)
    if f.ndim != 3:
        raise ShapeError(f"expected C x H x W input, got {f.shape}")
    if K is not None and K != layer.K:
        raise ShapeError(f"layer is built for K={layer.K}, asked for K={K}")
    return _single(layer, f)


def gconv_forward(layer: GroupConvLayer, f: ArrayLike) -> np.ndarray:
    f = as_array(f)
    if f.ndim != 4:
        raise ShapeError(f"expected C x K x H x W input, got {f.shape}")
    return _single(layer, f)
