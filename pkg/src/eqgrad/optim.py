"""First-order update rules: SGD, momentum, Adagrad, RMSProp and Adam.

An :class:`OptimizerState` carries the hyperparameters, one buffer set per
parameter slot and the step counter ``t``. :func:`step` updates a positional
list of parameter arrays; the ``*_step`` functions update a single tensor
held in slot 0. Every rule returns new arrays and leaves its inputs alone.

Update rules (g = gradient, all operations component-wise):

========  =============================================================
sgd       w - lr g
momentum  v = mu v - lr g;  w + v
adagrad   s = s + g^2;  w - lr g / (sqrt(s) + eps)
rmsprop   v = alpha v + (1 - alpha) g^2;  w - lr g / (sqrt(v) + eps)
adam      m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2;
          w - lr m_hat / (sqrt(v_hat) + eps),  x_hat = x / (1 - b^t)
========  =============================================================

Adam keeps the bias-corrected moments themselves, updated by the equivalent
recurrence x_hat_t = x_hat_{t-1} + (1 - b) / (1 - b^t) (u_t - x_hat_{t-1}),
with u_t = g for m and g^2 for v.
Under a constant gradient this returns c and c^2 exactly at every t, where
dividing the raw moving average by 1 - b^t is off by a few ulps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractError, ShapeError
from .tensor import ArrayLike, as_array

KINDS = ("sgd", "momentum", "adagrad", "rmsprop", "adam")

DEFAULTS = {
    "sgd": {"lr": 0.01},
    "momentum": {"lr": 0.01, "mu": 0.9},
    "adagrad": {"lr": 0.01, "eps": 1e-8},
    "rmsprop": {"lr": 0.001, "alpha": 0.9, "eps": 1e-8},
    "adam": {"lr": 0.001, "beta1": 0.9, "beta2": 0.99, "eps": 1e-8},
}

_BUFFERS = {"sgd": (), "momentum": ("v",), "adagrad": ("s",), "rmsprop": ("v",), "adam": ("m_hat", "v_hat")}


@dataclass
class OptimizerState:
    kind: str
    hyper: dict
    buffers: list[dict] = field(default_factory=list)
    t: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown optimizer {self.kind!r}; choose from {', '.join(KINDS)}")
        h = {**DEFAULTS[self.kind], **{k: v for k, v in self.hyper.items() if v is not None}}
        extra = set(h) - set(DEFAULTS[self.kind])
        if extra:
            raise ContractError(f"{self.kind} does not take {sorted(extra)}")
        _validate(self.kind, h)
        self.hyper = h

    @property
    def lr(self) -> float:
        return self.hyper["lr"]


def make_optimizer(kind: str, **hyper) -> OptimizerState:
    return OptimizerState(kind, dict(hyper))


def _validate(kind: str, h: dict) -> None:
    # lr = 0 is allowed (frozen run); negative is not
    if not (h["lr"] >= 0 and math.isfinite(h["lr"])):
        raise ContractError("learning rate must be a finite non-negative number")
    if "mu" in h and not 0 <= h["mu"] < 1:
        raise ContractError("momentum coefficient must be in [0, 1)")
    if "alpha" in h and not 0 < h["alpha"] < 1:
        raise ContractError("alpha must be in (0, 1)")
    for b in ("beta1", "beta2"):
        if b in h and not 0 < h[b] < 1:
            raise ContractError(f"{b} must be in (0, 1)")
    if "eps" in h and not h["eps"] >= 0:
        raise ContractError("eps must be non-negative")


def _slot(state: OptimizerState, i: int, shape) -> dict:
    while len(state.buffers) <= i:
        state.buffers.append({})
    buf = state.buffers[i]
    for name in _BUFFERS[state.kind]:
        if name not in buf:
            buf[name] = np.zeros(shape)
        elif buf[name].shape != shape:
            raise ShapeError(f"slot {i} holds {buf[name].shape} buffers, got a {shape} parameter")
    return buf


def _update(state: OptimizerState, i: int, w: np.ndarray, g: np.ndarray) -> np.ndarray:
    if w.shape != g.shape:
        raise ShapeError(f"parameter {w.shape} and gradient {g.shape} disagree")
    h, buf = state.hyper, _slot(state, i, w.shape)
    lr = h["lr"]
    if state.kind == "sgd":
        return w - lr * g
    if state.kind == "momentum":
        buf["v"] = h["mu"] * buf["v"] - lr * g
        return w + buf["v"]
    if state.kind == "adagrad":
        buf["s"] = buf["s"] + g * g
        return w - lr * g / (np.sqrt(buf["s"]) + h["eps"])
    if state.kind == "rmsprop":
        a = h["alpha"]
        buf["v"] = a * buf["v"] + (1 - a) * g * g
        return w - lr * g / (np.sqrt(buf["v"]) + h["eps"])
    t = state.t
    r1 = (1 - h["beta1"]) / (1 - h["beta1"] ** t)
    r2 = (1 - h["beta2"]) / (1 - h["beta2"] ** t)
    buf["m_hat"] = buf["m_hat"] + r1 * (g - buf["m_hat"])
    buf["v_hat"] = buf["v_hat"] + r2 * (g * g - buf["v_hat"])
    return w - lr * buf["m_hat"] / (np.sqrt(buf["v_hat"]) + h["eps"])


def adam_corrected(state: OptimizerState, i: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Bias-corrected moments (m_hat, v_hat) of slot i at the current t."""
    if state.kind != "adam" or state.t < 1:
        raise ContractError("bias-corrected moments exist only for adam after at least one step")
    buf = state.buffers[i]
    return buf["m_hat"].copy(), buf["v_hat"].copy()


def adam_moments(state: OptimizerState, i: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Raw moving averages (m_t, v_t) = x_hat (1 - b^t)."""
    m_hat, v_hat = adam_corrected(state, i)
    h = state.hyper
    return m_hat * (1 - h["beta1"] ** state.t), v_hat * (1 - h["beta2"] ** state.t)


def step(state: OptimizerState, ws: Sequence[ArrayLike], gs: Sequence[ArrayLike]) -> list[np.ndarray]:
    """One update of every parameter; the step counter advances once."""
    if len(ws) != len(gs):
        raise ShapeError(f"{len(ws)} parameters but {len(gs)} gradients")
    state.t += 1
    return [_update(state, i, as_array(w), as_array(g)) for i, (w, g) in enumerate(zip(ws, gs))]


def apply(state: OptimizerState, params, grads: Sequence[ArrayLike]) -> None:
    """In-place update of :class:`Parameter` objects."""
    new = step(state, [p.value for p in params], grads)
    for p, w in zip(params, new):
        p.value[...] = w


def _single(kind: str):
    def fn(state: OptimizerState, w: ArrayLike, g: ArrayLike) -> np.ndarray:
        if state.kind != kind:
            raise ContractError(f"{kind}_step called with a {state.kind} state")
        return step(state, [w], [g])[0]

    fn.__name__ = f"{kind}_step"
    fn.__doc__ = f"Single-tensor {kind} update (slot 0)."
    return fn


sgd_step = _single("sgd")
momentum_step = _single("momentum")
adagrad_step = _single("adagrad")
rmsprop_step = _single("rmsprop")
adam_step = _single("adam")


def effective_lr(state: OptimizerState, i: int = 0) -> np.ndarray:
    """Per-component step multiplier lr / (sqrt(acc) + eps) of an adagrad slot."""
    if state.kind != "adagrad":
        raise ContractError("effective_lr is defined for adagrad")
    return state.lr / (np.sqrt(state.buffers[i]["s"]) + state.hyper["eps"])
