"""Backward rules for the arithmetic, linear-algebra and loss primitives.

Saved tensors are kept minimal: ``add`` saves nothing, ``inner-product``
keeps both inputs, ``scalar-mul`` keeps only its constant (as an attribute).
"""
import numpy as np

from .autograd import register
from .errors import ContractError, ShapeError


def _same_shape(tag, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{tag} needs equal shapes, got {a.shape} and {b.shape}")


# -- pointwise arithmetic ----------------------------------------------------

def _add_fwd(a, b):
    _same_shape("add", a, b)
    return a + b, ()


register("add", _add_fwd, lambda saved, g: (g, g), arity=2)


def _sub_fwd(a, b):
    _same_shape("sub", a, b)
    return a - b, ()


register("sub", _sub_fwd, lambda saved, g: (g, -g), arity=2)


def _mul_fwd(a, b):
    _same_shape("mul", a, b)
    return a * b, (a, b)


def _mul_vjp(saved, g):
    a, b = saved
    return g * b, g * a


register("mul", _mul_fwd, _mul_vjp, arity=2)


register(
    "scalar-mul",
    lambda x, c: (c * x, ()),
    lambda saved, g, c: (c * g,),
    arity=1,
)
register("negate", lambda x: (-x, ()), lambda saved, g: (-g,), arity=1)
register(
    "add-const",
    lambda x, c: (x + c, ()),
    lambda saved, g, c: (g,),
    arity=1,
)
register("square", lambda x: (x * x, (x,)), lambda saved, g: (2.0 * saved[0] * g,), arity=1)


def _copy_fwd(x, k=2):
    return tuple(x.copy() for _ in range(k)), ()


def _copy_vjp(saved, *outgrads, k=2):
    total = outgrads[0].copy()
    for g in outgrads[1:]:
        total += g
    return (total,)


def _register_copy(k):
    register("copy" if k == 2 else f"copy{k}", lambda x: _copy_fwd(x, k), lambda s, *g: _copy_vjp(s, *g, k=k),
             arity=1, n_outputs=k)


for _k in (2, 3):
    _register_copy(_k)


# -- reductions and reshapes ---------------------------------------------------

def _sum_fwd(x):
    return np.asarray(x.sum()), (x.shape,)


register("sum", _sum_fwd, lambda saved, g: (np.full(saved[0], g.item()),), arity=1)


def _mean_fwd(x):
    return np.asarray(x.mean()), (x.shape,)


register("mean", _mean_fwd, lambda saved, g: (np.full(saved[0], g.item() / np.prod(saved[0])),), arity=1)


def _flatten_fwd(x):
    # row-major (C, H, W) -> C*H*W per sample
    return x.reshape(x.shape[0], -1), (x.shape,)


register("flatten", _flatten_fwd, lambda saved, g: (g.reshape(saved[0]),), arity=1)


# -- linear algebra --------------------------------------------------------------

def _matmul_fwd(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} @ {b.shape}")
    return a @ b, (a, b)


def _matmul_vjp(saved, g):
    a, b = saved
    return g @ b.T, a.T @ g


register("matmul", _matmul_fwd, _matmul_vjp, arity=2)


def _inner_fwd(a, b):
    if a.ndim != 1:
        raise ShapeError(f"inner-product needs vectors, got {a.shape}")
    _same_shape("inner-product", a, b)
    return np.asarray(a @ b), (a, b)


def _inner_vjp(saved, g):
    a, b = saved
    c = g.item()
    return c * b, c * a


register("inner-product", _inner_fwd, _inner_vjp, arity=2)


def _dense_fwd(x, w, b):
    # batch of row vectors: x (N, n), w (m, n), b (m,) -> x w^T + b
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ShapeError(f"dense shapes x{x.shape} w{w.shape} b{b.shape}")
    return x @ w.T + b, (x, w)


def _dense_vjp(saved, g):
    x, w = saved
    return g @ w, g.T @ x, g.sum(axis=0)


register("dense", _dense_fwd, _dense_vjp, arity=3)


# -- losses ----------------------------------------------------------------------

def _l2_fwd(y, target):
    _same_shape("l2-loss", y, target)
    d = y - target
    return np.asarray(0.5 * np.sum(d * d)), (d,)


def _l2_vjp(saved, g):
    (d,) = saved
    c = g.item()
    return c * d, -c * d


register("l2-loss", _l2_fwd, _l2_vjp, arity=2)


def _log_softmax(z):
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _nll_fwd(logits, labels):
    """Mean over the batch of -log softmax(logits)[label]."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"nll-loss needs (N, classes) logits and N labels, got {logits.shape}, {labels.shape}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= logits.shape[1]:
        raise ContractError("label out of range")
    logp = _log_softmax(logits)
    n = logits.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    return np.asarray(loss), (logp, labels)


def _nll_vjp(saved, g, labels):
    logp, labels = saved
    n = logp.shape[0]
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return (grad * (g.item() / n),)


register("nll-loss", _nll_fwd, _nll_vjp, arity=1)
