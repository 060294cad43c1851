"""Assembled SE(2) networks and the equivariance metric."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..initializers import sample_params, scheme_for
from ..layers.module import DenseLayer, Lambda, Module, Sequential
from ..tensor import ArrayLike, as_array
from .group import SE2Element, act_on_image
from .layers import GroupConvLayer, LiftLayer, ProjectLayer


def _lift(rng, c_in, c_out, K, m, init, act, name):
    fan = c_in * m * m
    s = scheme_for(init, fan, c_out * m * m)
    return LiftLayer(sample_params(s, (c_out, c_in, m, m), rng), np.zeros(c_out), K, act=act, name=name)


def _gconv(rng, c_in, c_out, K, m, init, act, name, kk=None):
    kk = K if kk is None else kk
    # SCC: per-channel group kernel then channel mixing; scale both factors
    ks = scheme_for(init, kk * m * m, kk * m * m)
    ms = scheme_for(init, c_in, c_out)
    return GroupConvLayer(sample_params(ks, (c_in, kk, m, m), rng), np.zeros(c_out),
                          mix=sample_params(ms, (c_out, c_in), rng), act=act, name=name)


def smooth_kernels(rng: np.random.Generator, lead: Sequence[int], m: int) -> np.ndarray:
    """Random m x m edge-like kernels: a + b.y + c.x under a cos^2 disk window.

    The window reaches zero inside the m x m square, so off-grid rotations lose
    no support at the corners, and the low polynomial degree keeps bilinear
    resampling accurate. Each kernel has unit Frobenius norm.
    """
    c = (m - 1) / 2.0
    yy, xx = np.mgrid[0:m, 0:m] - c
    r = np.hypot(yy, xx)
    radius = c + 0.5
    window = np.where(r < radius, np.cos(np.pi * r / (2 * radius)) ** 2, 0.0)
    basis = np.stack([np.ones((m, m)), yy, xx]) * window
    k = np.einsum("...b,bij->...ij", rng.normal(size=tuple(lead) + (len(basis),)), basis)
    return k / np.linalg.norm(k, axis=(-2, -1), keepdims=True)


def build_se2_pipeline(rng: np.random.Generator, K: int = 4, widths: Sequence[int] = (4, 4, 4),
                       lift_m: int = 3, group_m: int = 3, in_channels: int = 1,
                       project: str = "max", init: str = "he", smooth: bool = False) -> Sequential:
    """Image -> image network: lift, len(widths) - 1 group convolutions, projection.

    Fully convolutional with same padding, so it maps C x H x W to C' x H x W and
    commutes with quarter turns exactly when 4 divides K. ``smooth`` replaces
    the i.i.d. kernels with :func:`smooth_kernels`, which is what off-grid
    rotation tests need.
    """
    layers: list[Module] = [_lift(rng, in_channels, widths[0], K, lift_m, init, "relu", "lift")]
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        last = i == len(widths) - 2
        layers.append(_gconv(rng, a, b, K, group_m, init, "identity" if last else "relu", f"g{i + 1}"))
    if smooth:
        for layer in layers:
            k = layer.kernels.value
            k[...] = smooth_kernels(rng, k.shape[:-2], k.shape[-1])
    layers.append(ProjectLayer(project))
    return Sequential(*layers)


def ring_index_sets(h: int, w: int) -> list[list[int]]:
    """Flat pixel indices grouped by squared distance from the array center.

    Each ring is closed under quarter turns about the center (for square
    arrays), so a max over a ring is invariant to them.
    """
    r2 = (2 * np.arange(h)[:, None] - (h - 1)) ** 2 + (2 * np.arange(w)[None, :] - (w - 1)) ** 2
    return [np.flatnonzero(r2.ravel() == d).tolist() for d in np.unique(r2)]


def build_gcnn_classifier(rng: np.random.Generator, K: int = 8, widths: Sequence[int] = (8, 16, 16),
                          lift_m: int = 7, group_m: int = 5, in_channels: int = 1, n_classes: int = 10,
                          hidden: int = 64, size: int = 28, ring: str = "max", init: str = "he") -> Sequential:
    """Rotation-invariant classifier for square images (28 x 28 digits by default).

    lift (7x7) -> relu -> pool 2 -> gconv (5x5) -> relu -> pool 2 [-> gconv ...]
    -> max over theta -> max (``ring="max"``) or mean over each ring of equal
    radius -> dense -> relu -> dense. Pooling 28 -> 14 -> 7 uses blocks
    aligned with the image center, so every stage commutes with quarter
    turns and the logits are exactly invariant to them when 4 divides K.
    """
    layers: list[Module] = [_lift(rng, in_channels, widths[0], K, lift_m, init, "relu", "lift"),
                            Lambda("maxpool2d", m=2)]
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        layers.append(_gconv(rng, a, b, K, group_m, init, "relu", f"g{i + 1}"))
        if i == 0:
            layers.append(Lambda("maxpool2d", m=2))
    side = size // 2 // (2 if len(widths) > 1 else 1)
    sets = ring_index_sets(side, side)
    layers += [ProjectLayer("max"), Lambda(f"set-{ring}", sets=sets), Lambda("flatten")]
    n_feat = widths[-1] * len(sets)
    s1 = scheme_for(init, n_feat, hidden)
    s2 = scheme_for("xavier", hidden, n_classes)
    layers += [DenseLayer(sample_params(s1, (hidden, n_feat), rng), np.zeros(hidden), act="relu", name="fc1"),
               DenseLayer(sample_params(s2, (n_classes, hidden), rng), np.zeros(n_classes), name="fc2")]
    return Sequential(*layers)


def equivariance_error(net: Module | Callable, f: ArrayLike, g: SE2Element) -> float:
    """||net(g . f) - g . net(f)|| / ||net(f)|| for an image-to-image network on one C x H x W input."""
    f = as_array(f)
    run = net.predict if isinstance(net, Module) else net
    base = np.asarray(run(f[None]))[0]
    moved = np.asarray(run(act_on_image(g, f)[None]))[0]
    diff = np.linalg.norm(moved - act_on_image(g, base))
    norm = np.linalg.norm(base)
    if norm == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return float(diff / norm)


def band_limited_image(rng: np.random.Generator, size: int = 32, cutoff: float = 0.15,
                       channels: int = 1) -> np.ndarray:
    """Smooth random test image: low-pass Fourier noise under a disk-shaped window.

    The window vanishes before the corners, so rotations lose no mass outside
    the frame; the low-pass keeps bilinear interpolation error small.
    """
    noise = rng.normal(size=(channels, size, size))
    fr = np.fft.fftfreq(size)
    rad = np.hypot(fr[:, None], fr[None, :])
    smooth = np.real(np.fft.ifft2(np.fft.fft2(noise) * (rad <= cutoff)))
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    r = np.hypot(yy - c, xx - c) / (size / 2.0)
    window = np.where(r < 0.75, np.cos(np.pi * r / 1.5) ** 2, 0.0)
    out = smooth * window
    return out / np.abs(out).max()
