import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqgrad.autograd import Tape, backward, gradcheck, record, vjp
from eqgrad.checks import CASES, run_case, uncovered_ops
from eqgrad.errors import ContractError, NumericError, RegistryError, ShapeError
from worked import relu_net_loss, skip_net


def scalar(tape, node):
    return tape.value(node).item()


def test_record_forward_values():
    t = Tape()
    a, b = t.leaf([1, 2]), t.leaf([3, 4])
    assert t.value(record(t, "add", [a, b])).tolist() == [4, 6]
    assert t.value(t.record("relu", [t.leaf([-1, 2])])).tolist() == [0, 2]


def test_record_errors():
    t = Tape()
    a = t.leaf([1.0])
    with pytest.raises(RegistryError):
        t.record("no-such-op", [a])
    with pytest.raises(ShapeError):
        t.record("add", [a])
    with pytest.raises(ContractError):
        t.record("relu", [7])


def test_relu_net_forward_column():
    t, ids = relu_net_loss(1, 0, 1, 0)
    got = [scalar(t, ids[k]) for k in ("t1", "t2", "t3", "t4", "t5", "loss")]
    assert got == [1, 1, 1, 1, 1, 0.5]


def test_relu_net_backward_column():
    t, ids = relu_net_loss(1, 0, 1, 0)
    g = backward(t, ids["loss"])
    assert g[ids["t5"]].item() == 0.5
    assert g[ids["t4"]].item() == 1.0
    assert g[ids["t2"]].item() == 1.0
    assert (g[ids["a"]].item(), g[ids["b"]].item()) == (1.0, 1.0)


def test_dead_relu_blocks_gradient():
    t, ids = relu_net_loss(1, 0, 1, -2)
    g = t.backward(ids["loss"])
    assert (g[ids["a"]].item(), g[ids["b"]].item()) == (0.0, 0.0)


def test_relu_derivative_at_zero_is_one():
    t = Tape()
    x = t.leaf([0.0])
    assert t.backward(t.record("sum", [t.record("relu", [x])]))[x].item() == 1.0


def test_skip_net_two_consumers():
    t, ids = skip_net(1, 0, 1, 0)
    g_out = t.backward(ids["out"])
    assert g_out[ids["t2"]].item() == 2.0
    assert g_out[ids["a"]].item() == 2.0
    g_loss = t.backward(ids["loss"])
    # chain rule through the loss multiplies by t5 = F - y0 = 2
    assert g_loss[ids["t2"]].item() == 4.0
    assert g_loss[ids["a"]].item() == 4.0


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_accumulation_matches_fused_derivative(x0, y0, a, b):
    t, ids = skip_net(x0, y0, a, b)
    g = t.backward(ids["loss"])
    z = a * x0 + b
    fused = (2 * z if z >= 0 else z) - y0
    slope = 2.0 if z >= 0 else 1.0
    assert g[ids["b"]].item() == pytest.approx(fused * slope, rel=1e-12, abs=1e-12)
    assert g[ids["a"]].item() == pytest.approx(fused * slope * x0, rel=1e-12, abs=1e-12)


def test_backward_needs_scalar_loss():
    t = Tape()
    x = t.leaf([1.0, 2.0])
    with pytest.raises(ContractError):
        t.backward(t.record("relu", [x]))


def test_backward_is_deterministic():
    rng = np.random.default_rng(0)
    fn, inputs = CASES["net:lenet5"](rng)
    runs = []
    for _ in range(2):
        t = Tape()
        ids = [t.leaf(x) for x in inputs]
        g = t.backward(fn(t, *ids))
        runs.append([g[i].data.copy() for i in ids])
    for u, v in zip(*runs):
        assert np.array_equal(u, v)


def test_vjp_worked_rules():
    assert vjp("copy", (), [[1, 2], [3, 4]])[0].tolist() == [4, 6]
    ga, gb = vjp("inner-product", (np.array([1.0, 2.0]), np.array([3.0, 4.0])), [2.0])
    assert (ga.tolist(), gb.tolist()) == ([6, 8], [2, 4])
    t = Tape()
    y, yp = t.leaf([1, 3]), t.leaf([0, 1])
    g = t.backward(t.record("l2-loss", [y, yp]))
    assert g[y].tolist() == [1, 2]
    assert g[yp].tolist() == [-1, -2]
    with pytest.raises(RegistryError):
        vjp("nope", (), [1.0])


def test_gradcheck_quadratic_and_sigmoid():
    sq = lambda t, x: t.record("sum", [t.record("square", [x])])  # noqa: E731
    assert gradcheck(sq, [[3.0]]) <= 1e-8
    t = Tape()
    x = t.leaf([0.0])
    assert t.backward(t.record("sum", [t.record("sigmoid", [x])]))[x].item() == 0.25
    with pytest.raises(ContractError):
        gradcheck(sq, [[3.0]], h=0)


def test_gradcheck_flags_nan():
    fn = lambda t, x: t.record("sum", [t.record("square", [x])])  # noqa: E731
    with pytest.raises(NumericError):
        gradcheck(fn, [[np.nan]])


def test_gradcheck_detects_wrong_rule(monkeypatch):
    from eqgrad import autograd

    rule = autograd.OpRule("bad-double", lambda x: (2 * x, ()), lambda s, g: (3 * g,), arity=1)
    monkeypatch.setitem(autograd._REGISTRY, "bad-double", rule)
    fn = lambda t, x: t.record("sum", [t.record("bad-double", [x])])  # noqa: E731
    assert gradcheck(fn, [[1.0, 2.0]]) == pytest.approx(0.5)


def test_every_differentiable_op_has_a_case():
    assert uncovered_ops() == []


@pytest.mark.parametrize("tag", [t for t in CASES if not t.startswith("net:")])
def test_op_gradcheck_twenty_instances(tag):
    assert max(run_case(tag, seed) for seed in range(20)) <= 1e-4


def test_lenet_gradcheck_twenty_parameters():
    assert run_case("net:lenet5", seed=3, n_coords=20) <= 1e-4


def test_dump_lists_nodes():
    t, ids = relu_net_loss(1, 0, 1, 0)
    lines = t.dump().splitlines()
    assert len(lines) == len(t)
    assert lines[ids["t2"]].split()[:3] == [str(ids["t2"]), "add", f"{ids['t1']},1"]
