"""Dense float64 tensors.

A :class:`Tensor` is an immutable row-major array. Index order follows the
array convention: the first spatial index is the row (counted downward from
the top-left corner), the second is the column.

Storage is a read-only numpy array; the helpers below add the shape checks and
tie-breaking rules the rest of the package relies on.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ShapeError

DTYPE = np.float64

ArrayLike = Union["Tensor", np.ndarray, Sequence[float], float]


class Tensor:
    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=DTYPE, copy=True)
        arr.setflags(write=False)
        self._data = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        # takes ownership of ``arr`` without copying
        t = cls.__new__(cls)
        arr = np.asarray(arr, dtype=DTYPE)
        if arr.base is not None:
            arr = arr.copy()
        arr.setflags(write=False)
        t._data = arr
        return t

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def ndim(self) -> int:
        return self._data.ndim

    def numpy(self) -> np.ndarray:
        """Writable copy of the contents."""
        return self._data.copy()

    def item(self) -> float:
        return float(self._data.reshape(-1)[0]) if self.size == 1 else _scalar_error(self)

    def tolist(self):
        return self._data.tolist()

    def __array__(self, dtype=None, copy=None):
        return self._data if dtype is None else self._data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._data, other._data))

    __hash__ = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, data={np.array2string(self._data, precision=6)})"


def _scalar_error(t: Tensor):
    raise ShapeError(f"item() needs a single element, got shape {t.shape}")


def as_array(x: ArrayLike) -> np.ndarray:
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x, dtype=DTYPE)


def _check_shape(shape: Iterable[int]) -> tuple[int, ...]:
    shape = tuple(int(d) for d in shape)
    if any(d < 1 for d in shape):
        raise ShapeError(f"every dimension must be >= 1, got {shape}")
    return shape


def tensor_new(shape: Iterable[int], fill: Union[float, Sequence[float]] = 0.0) -> Tensor:
    """Build a tensor of ``shape`` from a scalar fill value or a flat value list."""
    shape = _check_shape(shape)
    n = math.prod(shape)
    if np.ndim(fill) == 0:
        return Tensor._wrap(np.full(shape, float(fill), dtype=DTYPE))
    values = np.asarray(fill, dtype=DTYPE).reshape(-1)
    if values.size != n:
        raise ShapeError(f"{values.size} values cannot fill shape {shape} ({n} elements)")
    return Tensor._wrap(values.reshape(shape).copy())


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_array(a), as_array(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs two matrices, got ranks {a.ndim} and {b.ndim}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    return Tensor._wrap(a @ b)


_EW = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "max": np.maximum,
}


def ew_binary(op: str, a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_array(a), as_array(b)
    if op not in _EW:
        raise ValueError(f"unknown elementwise op {op!r}")
    if a.shape != b.shape:
        raise ShapeError(f"elementwise {op} needs equal shapes, got {a.shape} and {b.shape}")
    return Tensor._wrap(_EW[op](a, b))


def argmax_first(a: np.ndarray, axis: int | None = None):
    """argmax with ties resolved to the lowest (flat) index.

    ``np.argmax`` already returns the first occurrence; this wrapper exists so
    the tie-breaking rule is stated in one place.
    """
    return np.argmax(a, axis=axis)


def reduce(op: str, a: ArrayLike, axis: int | None = None):
    """Reduce over ``axis`` or over all elements.

    ``argmax`` returns a flat index (int) when ``axis`` is None and an index
    tensor otherwise. Ties go to the lowest index.
    """
    a = as_array(a)
    if axis is not None and not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"axis {axis} out of range for rank {a.ndim}")
    if op == "sum":
        return Tensor._wrap(np.asarray(np.sum(a, axis=axis)))
    if op == "max":
        return Tensor._wrap(np.asarray(np.max(a, axis=axis)))
    if op == "argmax":
        idx = argmax_first(a, axis=axis)
        return int(idx) if axis is None else idx
    raise ValueError(f"unknown reduction {op!r}")
