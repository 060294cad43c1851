"""SE(2) arithmetic and its action on images, kernels and orientation stacks.

Points are (row, column) index pairs; a rotation R(theta) acts on them through
the usual 2 x 2 matrix. With this convention a quarter turn of an image equals
``np.rot90(f, 1)``.

Resampling is bilinear with zeros outside the array. Source coordinates within
``SNAP`` of an integer are snapped to it, so quarter turns and integer shifts
are exact pixel permutations. Kernel rotations by ``q * pi/2 + r`` are built
as ``rot90(bilinear(r), q)`` so rotating by an extra quarter turn is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ContractError, ShapeError
from ..tensor import ArrayLike, as_array

TWO_PI = 2.0 * math.pi
SNAP = 1e-9


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _wrap_angle(theta: float) -> float:
    t = math.fmod(theta, TWO_PI)
    if t < 0:
        t += TWO_PI
    return 0.0 if t >= TWO_PI else t


@dataclass(frozen=True)
class SE2Element:
    x: tuple[float, float] = (0.0, 0.0)
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", (float(self.x[0]), float(self.x[1])))
        object.__setattr__(self, "theta", _wrap_angle(float(self.theta)))

    def __matmul__(self, other: "SE2Element") -> "SE2Element":
        return se2_compose(self, other)

    def act(self, p: ArrayLike) -> np.ndarray:
        """g . p = x + R(theta) p."""
        return np.asarray(self.x) + rotation(self.theta) @ as_array(p)


IDENTITY = SE2Element()


def se2_compose(g1: SE2Element, g2: SE2Element) -> SE2Element:
    """(x1, t1)(x2, t2) = (x1 + R(t1) x2, t1 + t2)."""
    x = np.asarray(g1.x) + rotation(g1.theta) @ np.asarray(g2.x)
    return SE2Element((x[0], x[1]), g1.theta + g2.theta)


def se2_inverse(g: SE2Element) -> SE2Element:
    x = -(rotation(-g.theta) @ np.asarray(g.x))
    return SE2Element((x[0], x[1]), -g.theta)


def se2_distance(g1: SE2Element, g2: SE2Element) -> float:
    """Euclidean distance on x plus the wrapped angular distance."""
    dt = abs(g1.theta - g2.theta)
    dt = min(dt, TWO_PI - dt)
    return float(np.hypot(g1.x[0] - g2.x[0], g1.x[1] - g2.x[1]) + dt)


# -- bilinear resampling ------------------------------------------------------------

def _snap(c: np.ndarray) -> np.ndarray:
    r = np.round(c)
    return np.where(np.abs(c - r) < SNAP, r, c)


def sampling_matrix(rows: np.ndarray, cols: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Matrix S with (S @ f.ravel()) = f bilinearly sampled at (rows, cols), zero outside."""
    h, w = shape
    rows, cols = _snap(np.ravel(rows)), _snap(np.ravel(cols))
    r0, c0 = np.floor(rows), np.floor(cols)
    fr, fc = rows - r0, cols - c0
    S = np.zeros((rows.size, h * w))
    out = np.arange(rows.size)
    for dr, dc, wt in ((0, 0, (1 - fr) * (1 - fc)), (0, 1, (1 - fr) * fc),
                       (1, 0, fr * (1 - fc)), (1, 1, fr * fc)):
        rr, cc = r0 + dr, c0 + dc
        ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w) & (wt != 0)
        np.add.at(S, (out[ok], (rr[ok] * w + cc[ok]).astype(np.int64)), wt[ok])
    return S


def _source_coords(shape: tuple[int, int], theta: float, shift=(0.0, 0.0)):
    """Source points g^{-1} . p of every output pixel p, about the array center."""
    h, w = shape
    center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    pr, pc = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    p = np.stack([pr.ravel(), pc.ravel()]) - center[:, None] - np.asarray(shift, dtype=float)[:, None]
    src = rotation(-theta) @ p + center[:, None]
    return src[0], src[1]


def _quarter_split(theta: float) -> tuple[int, float]:
    """theta = q * pi/2 + r with r in [0, pi/2); exact multiples give r = 0."""
    t = _wrap_angle(theta) / (math.pi / 2)
    q = round(t)
    if abs(t - q) < 1e-12:
        return q % 4, 0.0
    q = math.floor(t)
    return q % 4, _wrap_angle(theta) - q * (math.pi / 2)


@lru_cache(maxsize=256)
def _kernel_rotation_cached(m: int, q: int, r: float) -> np.ndarray:
    if r == 0.0:
        base = np.eye(m * m)
    else:
        base = sampling_matrix(*_source_coords((m, m), r), (m, m))
    # rows index output pixels: rotate the row layout q quarter turns
    rows = np.rot90(base.reshape(m, m, m * m), q, axes=(0, 1)).reshape(m * m, m * m)
    rows.setflags(write=False)
    return rows


def kernel_rotation_matrix(m: int, theta: float) -> np.ndarray:
    """Linear map (m^2 x m^2) taking a flattened m x m kernel to its rotation by theta."""
    if m % 2 == 0:
        raise ContractError(f"kernel size must be odd to rotate about its center, got {m}")
    q, r = _quarter_split(theta)
    return _kernel_rotation_cached(m, q, r)


def orientation_angles(K: int) -> np.ndarray:
    return TWO_PI * np.arange(K) / K


def bin_rotation_matrices(m: int, K: int) -> np.ndarray:
    """Stack (K, m^2, m^2) of kernel rotations for theta_k = 2 pi k / K.

    When 4 divides K the quarter-turn part of each bin is taken from the bin
    index, so bins k and k + K/4 differ by an exact 90 degree permutation.
    """
    if m % 2 == 0:
        raise ContractError(f"kernel size must be odd to rotate about its center, got {m}")
    mats = []
    for k in range(K):
        if K % 4 == 0:
            q, j = divmod(k, K // 4)
            mats.append(_kernel_rotation_cached(m, q, TWO_PI * j / K))
        else:
            mats.append(kernel_rotation_matrix(m, TWO_PI * k / K))
    return np.stack(mats)


def rotate_kernel(k: ArrayLike, theta: float) -> np.ndarray:
    """Sample k at R(-theta)-rotated offsets about its center (active rotation)."""
    k = as_array(k)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ShapeError(f"kernel must be square, got {k.shape}")
    m = k.shape[0]
    return (kernel_rotation_matrix(m, theta) @ k.ravel()).reshape(m, m)


def act_on_image(g: SE2Element, f: ArrayLike) -> np.ndarray:
    """(g . f)(p) = f(g^{-1} . p) on the last two axes, rotating about the image center."""
    f = as_array(f)
    h, w = f.shape[-2:]
    if g == IDENTITY:
        return f.copy()
    q, r = _quarter_split(g.theta)
    if r == 0.0 and h == w and all(float(s).is_integer() for s in g.x):
        # grid-exact: permutation
        out = np.rot90(f, q, axes=(-2, -1))
        return _shift(out, int(g.x[0]), int(g.x[1]))
    S = sampling_matrix(*_source_coords((h, w), g.theta, g.x), (h, w))
    flat = f.reshape(-1, h * w) @ S.T
    return flat.reshape(f.shape)


def _shift(f: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Translate the last two axes by (dr, dc) pixels, filling with zeros."""
    out = np.zeros_like(f)
    h, w = f.shape[-2:]
    if abs(dr) >= h or abs(dc) >= w:
        return out
    src_r = slice(max(0, -dr), h - max(0, dr))
    dst_r = slice(max(0, dr), h - max(0, -dr))
    src_c = slice(max(0, -dc), w - max(0, dc))
    dst_c = slice(max(0, dc), w - max(0, -dc))
    out[..., dst_r, dst_c] = f[..., src_r, src_c]
    return out


def theta_shift(theta: float, K: int) -> int:
    """Number of orientation bins corresponding to theta; it must lie on the grid."""
    s = _wrap_angle(theta) * K / TWO_PI
    n = round(s)
    if abs(s - n) > 1e-9:
        raise ContractError(f"angle {theta} is not a multiple of 2pi/{K}")
    return n % K


def act_on_stack(g: SE2Element, f: ArrayLike) -> np.ndarray:
    """Action on functions on SE(2): arrays (..., K, H, W).

    (g . f)(y, a) = f(R(-theta)(y - x), a - theta): every orientation slice is
    moved spatially and the stack is cyclically shifted along the angle axis.
    """
    f = as_array(f)
    K = f.shape[-3]
    s = theta_shift(g.theta, K)
    return act_on_image(g, np.roll(f, s, axis=-3))
