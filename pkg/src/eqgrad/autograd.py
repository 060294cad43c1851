"""Tape-based reverse-mode automatic differentiation.

Every primitive operation is described by an :class:`OpRule`: a forward
function producing the value plus the tensors its backward rule needs
("saved tensors"), and a vector-Jacobian product computing ``J(x)^T ybar``
for each parent. Recording appends a node to a :class:`Tape`; since a node can
only reference nodes recorded before it, the tape index order is already a
topological order and :meth:`Tape.backward` simply walks it in reverse,
summing the contributions of every consumer into each node's gradient.

Forward and VJP functions work on raw numpy arrays; the tape stores values as
:class:`~eqgrad.tensor.Tensor`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import ContractError, NumericError, RegistryError, ShapeError
from .tensor import DTYPE, ArrayLike, Tensor, as_array

NodeId = int


@dataclass(frozen=True)
class OpRule:
    tag: str
    forward: Callable[..., tuple[Any, tuple]]
    vjp: Optional[Callable[..., Sequence[Optional[np.ndarray]]]]
    arity: Optional[int] = None  # None: variadic
    n_outputs: int = 1


_REGISTRY: dict[str, OpRule] = {}


def register(tag: str, forward, vjp, arity: Optional[int] = None, n_outputs: int = 1) -> OpRule:
    """Add an op to the global registry.

    ``forward(*inputs, **attrs)`` returns ``(value, saved)`` (``value`` is a
    tuple of arrays when ``n_outputs > 1``). ``vjp(saved, *outgrads, **attrs)``
    returns one gradient per parent; ``None`` stands for zero. Ops without a
    VJP (``vjp=None``) cannot be recorded.
    """
    r = OpRule(tag, forward, vjp, arity, n_outputs)
    _REGISTRY[tag] = r
    return r


def get_rule(tag: str) -> OpRule:
    try:
        return _REGISTRY[tag]
    except KeyError:
        raise RegistryError(f"no rule registered for op {tag!r}") from None


def registered_ops() -> list[str]:
    return sorted(_REGISTRY)


def vjp(op_tag: str, saved: Sequence, outgrads: Sequence[ArrayLike], **attrs) -> list[Optional[np.ndarray]]:
    """Apply the backward rule of ``op_tag`` outside of any tape."""
    r = get_rule(op_tag)
    if r.vjp is None:
        raise RegistryError(f"op {op_tag!r} has no backward rule")
    if len(outgrads) != r.n_outputs:
        raise ShapeError(f"{op_tag} has {r.n_outputs} outputs, got {len(outgrads)} output gradients")
    return list(r.vjp(tuple(saved), *[as_array(g) for g in outgrads], **attrs))


@dataclass
class TapeNode:
    op_tag: str
    parents: tuple[NodeId, ...]
    saved: tuple
    value: Tensor
    attrs: dict = field(default_factory=dict)
    name: Optional[str] = None
    # multi-output ops: ids of the per-output nodes; for an output node, its slot
    outputs: tuple[NodeId, ...] = ()
    slot: Optional[int] = None
    grad_buf: Optional[np.ndarray] = None

    @property
    def grad(self) -> np.ndarray:
        if self.grad_buf is None:
            return np.zeros(self.value.shape, dtype=DTYPE)
        return self.grad_buf


class Tape:
    """Ordered record of a computation; one tape per forward/backward pass."""

    def __init__(self):
        self.nodes: list[TapeNode] = []
        self._bound: dict[int, NodeId] = {}

    def __len__(self):
        return len(self.nodes)

    def _append(self, node: TapeNode) -> NodeId:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def leaf(self, value: ArrayLike, name: Optional[str] = None) -> NodeId:
        value = value if isinstance(value, Tensor) else Tensor(value)
        return self._append(TapeNode("leaf", (), (), value, name=name))

    def param(self, p) -> NodeId:
        """Leaf for a :class:`~eqgrad.layers.module.Parameter`, created once per tape."""
        key = id(p)
        if key not in self._bound:
            self._bound[key] = self.leaf(p.value, name=p.name)
        return self._bound[key]

    def bind(self, p, node: NodeId) -> None:
        """Make ``param(p)`` return an existing node (used by gradient checks)."""
        self._bound[id(p)] = node

    def value(self, node: NodeId) -> Tensor:
        return self.nodes[node].value

    def record(self, op_tag: str, parents: Sequence[NodeId], **attrs):
        r = get_rule(op_tag)
        if r.vjp is None:
            raise RegistryError(f"op {op_tag!r} is forward-only and cannot be recorded")
        parents = tuple(int(p) for p in parents)
        if r.arity is not None and len(parents) != r.arity:
            raise ShapeError(f"{op_tag} takes {r.arity} inputs, got {len(parents)}")
        for p in parents:
            if not 0 <= p < len(self.nodes):
                raise ContractError(f"parent {p} is not on this tape")
        inputs = [self.nodes[p].value.data for p in parents]
        out, saved = r.forward(*inputs, **attrs)
        if r.n_outputs == 1:
            return self._append(TapeNode(op_tag, parents, tuple(saved), _freeze(out), attrs))
        op_id = self._append(
            TapeNode(op_tag, parents, tuple(saved), _freeze(np.stack(out)), attrs)
        )
        outs = tuple(
            self._append(TapeNode(f"{op_tag}:out", (op_id,), (), _freeze(o), slot=i))
            for i, o in enumerate(out)
        )
        self.nodes[op_id].outputs = outs
        return outs

    def backward(self, loss: NodeId) -> dict[NodeId, Tensor]:
        """Fill every node's gradient with d(loss)/d(node) and return them by id."""
        loss_node = self.nodes[loss]
        if loss_node.value.size != 1:
            raise ContractError(f"loss must be scalar, node {loss} has shape {loss_node.value.shape}")
        for n in self.nodes:
            n.grad_buf = None
        loss_node.grad_buf = np.ones(loss_node.value.shape, dtype=DTYPE)

        for i in range(loss, -1, -1):
            node = self.nodes[i]
            if node.op_tag == "leaf" or node.slot is not None:
                continue
            if node.outputs:
                outgrads = [self.nodes[o].grad for o in node.outputs]
                if all(self.nodes[o].grad_buf is None for o in node.outputs):
                    continue
            else:
                if node.grad_buf is None:
                    continue
                outgrads = [node.grad_buf]
            contribs = get_rule(node.op_tag).vjp(node.saved, *outgrads, **node.attrs)
            if len(contribs) != len(node.parents):
                raise ContractError(
                    f"{node.op_tag} backward returned {len(contribs)} gradients for {len(node.parents)} parents"
                )
            for p, c in zip(node.parents, contribs):
                if c is None:
                    continue
                pn = self.nodes[p]
                if c.shape != pn.value.shape:
                    raise ShapeError(
                        f"{node.op_tag} backward produced shape {c.shape} for parent of shape {pn.value.shape}"
                    )
                if pn.grad_buf is None:
                    pn.grad_buf = np.array(c, dtype=DTYPE, copy=True)
                else:
                    pn.grad_buf += c
        return {i: Tensor._wrap(n.grad) for i, n in enumerate(self.nodes[: loss + 1])}

    def dump(self) -> str:
        """Plain-text listing, one ``id op parents shape`` line per node. Not a stable format."""
        lines = []
        for i, n in enumerate(self.nodes):
            parents = ",".join(map(str, n.parents)) or "-"
            shape = "x".join(map(str, n.value.shape)) or "scalar"
            label = f" {n.name}" if n.name else ""
            lines.append(f"{i} {n.op_tag} {parents} {shape}{label}")
        return "\n".join(lines)


def _freeze(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor._wrap(np.asarray(x, dtype=DTYPE))


def record(tape: Tape, op_tag: str, parents: Sequence[NodeId], **attrs):
    return tape.record(op_tag, parents, **attrs)


def backward(tape: Tape, loss: NodeId) -> dict[NodeId, Tensor]:
    return tape.backward(loss)


def gradcheck(
    fn: Callable[..., NodeId],
    inputs: Sequence[ArrayLike],
    h: float = 1e-6,
    n_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    avoid_kinks: bool = False,
    kink_tol: float = 1e-3,
) -> float:
    """Compare tape gradients against central differences.

    ``fn(tape, *leaf_ids)`` records a scalar function of the inputs and returns
    the loss node. Each checked coordinate is perturbed by ``+-h``; the result
    is ``max |analytic - numeric| / max(1, |numeric|)``. With ``n_coords`` set,
    that many coordinates are drawn (without replacement) across all inputs.

    With ``avoid_kinks`` a coordinate whose one-sided difference quotients
    disagree by more than ``kink_tol`` (relative) straddles a non-smooth point
    (relu at 0, a max tie) and is replaced by another draw.
    """
    if h <= 0:
        raise ContractError("step h must be positive")
    base = [np.array(as_array(x), dtype=DTYPE) for x in inputs]

    tape = Tape()
    ids = [tape.leaf(x) for x in base]
    loss = fn(tape, *ids)
    grads = tape.backward(loss)
    analytic = [grads[i].data for i in ids]

    coords = [(k, j) for k, x in enumerate(base) for j in range(x.size)]
    want = len(coords) if n_coords is None else min(n_coords, len(coords))
    if want < len(coords) or avoid_kinks:
        rng = rng if rng is not None else np.random.default_rng(0)
        coords = [coords[p] for p in rng.permutation(len(coords))]

    def evaluate(k, j, delta):
        xs = [x if q != k else x.copy() for q, x in enumerate(base)]
        xs[k].flat[j] += delta
        t = Tape()
        leaf_ids = [t.leaf(x) for x in xs]
        return t.value(fn(t, *leaf_ids)).item()

    center = None
    if avoid_kinks:
        t = Tape()
        center = t.value(fn(t, *[t.leaf(x) for x in base])).item()

    worst, done = 0.0, 0
    for k, j in coords:
        if done == want:
            break
        up, down = evaluate(k, j, h), evaluate(k, j, -h)
        if avoid_kinks:
            right, left = (up - center) / h, (center - down) / h
            if abs(right - left) > kink_tol * max(1.0, abs(right), abs(left)):
                continue
        done += 1
        numeric = (up - down) / (2 * h)
        a = analytic[k].flat[j]
        if not (np.isfinite(numeric) and np.isfinite(a)):
            raise NumericError(f"non-finite gradient at input {k}, element {j}: analytic={a}, numeric={numeric}")
        worst = max(worst, abs(a - numeric) / max(1.0, abs(numeric)))
    return worst
