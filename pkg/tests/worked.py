"""Scalar networks used by the autograd tests, recorded one primitive at a time."""
from eqgrad.autograd import Tape


def relu_net_loss(x0, y0, a, b):
    """l = (relu(a x0 + b) - y0)^2 / 2; returns (tape, ids) with ids t1..t5, loss, a, b."""
    t = Tape()
    a_id, b_id, x_id, y_id = t.leaf([a]), t.leaf([b]), t.leaf([x0]), t.leaf([y0])
    t1 = t.record("mul", [a_id, x_id])
    t2 = t.record("add", [t1, b_id])
    t3 = t.record("relu", [t2])
    t4 = t.record("sub", [t3, y_id])
    t5 = t.record("square", [t4])
    loss = t.record("sum", [t.record("scalar-mul", [t5], c=0.5)])
    return t, dict(t1=t1, t2=t2, t3=t3, t4=t4, t5=t5, loss=loss, a=a_id, b=b_id)


def skip_net(x0, y0, a, b):
    """F = relu(a x0 + b) + (a x0 + b) with the same squared loss; t2 feeds two consumers."""
    t = Tape()
    a_id, b_id, x_id, y_id = t.leaf([a]), t.leaf([b]), t.leaf([x0]), t.leaf([y0])
    t1 = t.record("mul", [a_id, x_id])
    t2 = t.record("add", [t1, b_id])
    t3 = t.record("relu", [t2])
    t4 = t.record("add", [t2, t3])
    t5 = t.record("sub", [t4, y_id])
    t6 = t.record("square", [t5])
    loss = t.record("sum", [t.record("scalar-mul", [t6], c=0.5)])
    out = t.record("sum", [t4])
    return t, dict(t1=t1, t2=t2, t3=t3, t4=t4, t5=t5, t6=t6, loss=loss, out=out, a=a_id, b=b_id)
