import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqgrad.errors import ContractError, ShapeError
from eqgrad.gcnn import (IDENTITY, GroupConvLayer, LiftLayer, ProjectLayer, SE2Element, act_on_image, act_on_stack,
                         band_limited_image, build_gcnn_classifier, build_se2_pipeline, equivariance_error,
                         gconv_forward, lift_forward, project_integrate, project_max, rotate_kernel, se2_compose,
                         se2_distance, se2_inverse, smooth_kernels)
from eqgrad.gcnn.model import ring_index_sets
from eqgrad.layers import Conv2DLayer, PadSpec, scc_forward, xcorr2d, zero_pad2d

QUARTER = SE2Element((0.0, 0.0), math.pi / 2)
angles = st.floats(-20, 20, allow_nan=False)
coords = st.floats(-50, 50, allow_nan=False)
elements = st.builds(lambda a, b, t: SE2Element((a, b), t), coords, coords, angles)


def close(g, h, tol=1e-12):
    return se2_distance(g, h) <= tol


# -- group arithmetic ----------------------------------------------------------------

@given(elements)
def test_identity_and_inverse(g):
    assert close(g @ IDENTITY, g) and close(IDENTITY @ g, g)
    assert close(g @ se2_inverse(g), IDENTITY, 1e-12 * max(1, abs(g.x[0]) + abs(g.x[1])))
    assert 0 <= g.theta < 2 * math.pi


@settings(max_examples=1000)
@given(elements, elements, elements)
def test_associativity(a, b, c):
    left, right = se2_compose(se2_compose(a, b), c), se2_compose(a, se2_compose(b, c))
    scale = 1 + sum(abs(v) for e in (a, b, c) for v in e.x)
    assert close(left, right, 1e-12 * scale)


def test_group_examples():
    assert se2_inverse(IDENTITY) == IDENTITY
    assert se2_inverse(SE2Element((2.0, -3.0), 0)) == SE2Element((-2.0, 3.0), 0)
    r = se2_compose(SE2Element(theta=0.4), SE2Element(theta=1.1))
    assert r.x == (0.0, 0.0) and r.theta == pytest.approx(1.5, abs=1e-15)
    a, b = SE2Element((1, 0), math.pi / 2), SE2Element((1, 0), 0)
    ab, ba = a @ b, b @ a
    assert np.allclose(ab.x, (1, 1), atol=1e-15) and np.allclose(ba.x, (2, 0), atol=1e-15)
    assert SE2Element(theta=-math.pi / 2).theta == pytest.approx(3 * math.pi / 2)


# -- actions -------------------------------------------------------------------------

def test_act_on_image_quarter_turns():
    f = np.zeros((4, 4))
    f[0, 0] = 1
    assert np.array_equal(act_on_image(IDENTITY, f), f)
    once = act_on_image(QUARTER, f)
    assert np.array_equal(once, np.rot90(f)) and once[3, 0] == 1
    g = f
    for _ in range(4):
        g = act_on_image(QUARTER, g)
    assert np.array_equal(g, f)


def brute_action(g, f):
    """(g.f)(p) = f(g^-1 p) pixel by pixel, for grid-exact g."""
    h, w = f.shape
    c = np.array([(h - 1) / 2, (w - 1) / 2])
    inv = se2_inverse(g)
    out = np.zeros_like(f)
    for i in range(h):
        for j in range(w):
            s = np.rint(inv.act(np.array([i, j]) - c) + c).astype(int)
            if 0 <= s[0] < h and 0 <= s[1] < w:
                out[i, j] = f[s[0], s[1]]
    return out


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 3), st.integers(-3, 3), st.integers(-3, 3), st.integers(0, 3), st.integers(-3, 3),
       st.integers(-3, 3))
def test_action_axiom_grid_exact(q1, r1, c1, q2, r2, c2):
    f = np.random.default_rng(q1 + 4 * q2).normal(size=(7, 7))
    g1 = SE2Element((r1, c1), q1 * math.pi / 2)
    g2 = SE2Element((r2, c2), q2 * math.pi / 2)
    assert np.array_equal(act_on_image(g1, f), brute_action(g1, f))
    two_step = act_on_image(g2, act_on_image(g1, f))
    # composition agrees wherever no pixel left the frame in between
    mask = act_on_image(g2, act_on_image(g1, np.ones_like(f))) == 1
    assert np.array_equal(two_step[mask], act_on_image(g2 @ g1, f)[mask])
    if r1 == c1 == 0:
        assert np.array_equal(two_step, act_on_image(g2 @ g1, f))


def test_act_on_stack_rolls_theta():
    f = np.random.default_rng(0).normal(size=(2, 4, 5, 5))
    out = act_on_stack(QUARTER, f)
    assert np.array_equal(out, np.rot90(np.roll(f, 1, axis=-3), 1, axes=(-2, -1)))
    with pytest.raises(ContractError):
        act_on_stack(SE2Element(theta=0.3), f)


# -- kernel rotation -----------------------------------------------------------------

def test_rotate_kernel_cases():
    k = np.random.default_rng(1).normal(size=(5, 5))
    assert np.array_equal(rotate_kernel(k, 0.0), k)
    assert np.array_equal(rotate_kernel(k, math.pi / 2), np.rot90(k))
    assert np.array_equal(rotate_kernel(k, math.pi), np.rot90(k, 2))
    with pytest.raises(ContractError):
        rotate_kernel(np.ones((4, 4)), 0.3)


def test_rotate_kernel_radial_gaussian():
    m, sigma = 7, 1.5
    yy, xx = np.mgrid[0:m, 0:m] - (m - 1) / 2
    k = np.exp(-(yy**2 + xx**2) / (2 * sigma**2))
    k /= k.sum()
    worst = max(np.max(np.abs(rotate_kernel(k, t) - k)) for t in np.linspace(0, 2 * np.pi, 361))
    assert worst <= 1e-2


def test_rotate_kernel_matches_pointwise_bilinear():
    k = np.random.default_rng(2).normal(size=(5, 5))
    theta = 0.37
    c = 2.0
    out = np.zeros_like(k)
    for i in range(5):
        for j in range(5):
            y, x = i - c, j - c
            sy = math.cos(theta) * y + math.sin(theta) * x + c
            sx = -math.sin(theta) * y + math.cos(theta) * x + c
            y0, x0 = math.floor(sy), math.floor(sx)
            for dy in (0, 1):
                for dx in (0, 1):
                    yy, xx = y0 + dy, x0 + dx
                    if 0 <= yy < 5 and 0 <= xx < 5:
                        out[i, j] += (1 - abs(sy - yy)) * (1 - abs(sx - xx)) * k[yy, xx]
    assert np.max(np.abs(rotate_kernel(k, theta) - out)) <= 1e-12


# -- lifting and group convolution ---------------------------------------------------

def same_xcorr(k, f):
    return xcorr2d(k, zero_pad2d(f, PadSpec.same(k.shape[0])))


def lift_oracle(k, a, b, f, K):
    c_out = a.shape[0]
    out = np.zeros((c_out, K) + f.shape[1:])
    for d in range(c_out):
        for j in range(K):
            out[d, j] = sum(a[d, c] * same_xcorr(rotate_kernel(k[c], 2 * np.pi * j / K), f[c])
                            for c in range(f.shape[0])) + b[d]
    return out


def gconv_oracle(k, a, b, f):
    c_in, K = f.shape[:2]
    kk = k.shape[1]
    full = np.zeros((c_in, K) + k.shape[2:])
    shift = 0 if kk == K else kk // 2  # short kernels are centred on offset 0
    for t in range(kk):
        full[:, (t - shift) % K] = k[:, t]
    out = np.zeros((a.shape[0], K) + f.shape[2:])
    for d in range(a.shape[0]):
        for j in range(K):
            out[d, j] = b[d] + sum(
                a[d, c] * same_xcorr(rotate_kernel(full[c, (jp - j) % K], 2 * np.pi * j / K), f[c, jp])
                for c in range(c_in) for jp in range(K))
    return out


@pytest.mark.parametrize("K", [1, 4, 6, 8])
def test_lift_matches_oracle(K):
    rng = np.random.default_rng(K)
    k, a, b, f = rng.normal(size=(2, 5, 5)), rng.normal(size=(3, 2)), rng.normal(size=3), rng.normal(size=(2, 7, 6))
    got = lift_forward(LiftLayer(k, b, K, mix=a), f, K)
    assert np.max(np.abs(got - lift_oracle(k, a, b, f, K))) <= 1e-12
    mcc = LiftLayer(a[:, :, None, None] * k[None], b, K)
    assert np.max(np.abs(lift_forward(mcc, f) - got)) <= 1e-12


def test_lift_k1_is_plain_scc_and_zero_kernel():
    rng = np.random.default_rng(9)
    k, a, b, f = rng.normal(size=(2, 3, 3)), rng.normal(size=(3, 2)), rng.normal(size=3), rng.normal(size=(2, 6, 6))
    plain = scc_forward(Conv2DLayer("SCC", k, b, mix=a, pad=PadSpec.same(3)), f)
    assert np.max(np.abs(lift_forward(LiftLayer(k, b, 1, mix=a), f)[:, 0] - plain)) <= 1e-12
    z = lift_forward(LiftLayer(np.zeros((2, 3, 3)), b, 4, mix=a, act="sigmoid"), f)
    assert np.allclose(z, 1 / (1 + np.exp(-b))[:, None, None, None], rtol=0, atol=1e-15)
    with pytest.raises(ShapeError):
        lift_forward(LiftLayer(k, b, 4, mix=a), f, K=8)
    with pytest.raises(ShapeError):
        LiftLayer(np.ones((2, 4, 4)), b, 4, mix=a)


@pytest.mark.parametrize("K,kk", [(4, 4), (8, 8), (8, 3), (6, 5)])
def test_gconv_matches_oracle(K, kk):
    rng = np.random.default_rng(K * 10 + kk)
    k, a, b = rng.normal(size=(2, kk, 3, 3)), rng.normal(size=(3, 2)), rng.normal(size=3)
    f = rng.normal(size=(2, K, 5, 6))
    got = gconv_forward(GroupConvLayer(k, b, mix=a), f)
    assert np.max(np.abs(got - gconv_oracle(k, a, b, f))) <= 1e-12
    mcc = GroupConvLayer(a[:, :, None, None, None] * k[None], b)
    assert np.max(np.abs(gconv_forward(mcc, f) - got)) <= 1e-12


def test_gconv_delta_kernel_is_identity_and_k1_is_plain():
    rng = np.random.default_rng(3)
    K = 4  # quarter turns map a centred delta to itself; bilinear pi/4 turns smear it
    k = np.zeros((2, K, 3, 3))
    k[:, 0, 1, 1] = 1  # angular offset 0, spatial centre
    f = rng.normal(size=(2, K, 6, 6))
    out = gconv_forward(GroupConvLayer(k, np.zeros(2), mix=np.eye(2)), f)
    assert np.max(np.abs(out - f)) <= 1e-15
    k1, a, b = rng.normal(size=(2, 1, 3, 3)), rng.normal(size=(3, 2)), rng.normal(size=3)
    g = rng.normal(size=(2, 1, 5, 5))
    plain = scc_forward(Conv2DLayer("SCC", k1[:, 0], b, mix=a, pad=PadSpec.same(3)), g[:, 0])
    assert np.max(np.abs(gconv_forward(GroupConvLayer(k1, b, mix=a), g)[:, 0] - plain)) <= 1e-12
    with pytest.raises(ShapeError):
        gconv_forward(GroupConvLayer(k1, b, mix=a), g[:, 0])


def test_lift_and_gconv_quarter_turn_equivariance():
    rng = np.random.default_rng(4)
    lift = LiftLayer(rng.normal(size=(2, 5, 5)), rng.normal(size=3), 4, mix=rng.normal(size=(3, 2)))
    f = rng.normal(size=(2, 8, 8))
    moved = lift_forward(lift, act_on_image(QUARTER, f))
    assert np.max(np.abs(moved - act_on_stack(QUARTER, lift_forward(lift, f)))) <= 1e-9
    gconv = GroupConvLayer(rng.normal(size=(4, 4, 3, 3)), rng.normal(size=2), mix=rng.normal(size=(2, 4)))
    s = rng.normal(size=(4, 4, 6, 6))
    moved = gconv_forward(gconv, act_on_stack(QUARTER, s))
    assert np.max(np.abs(moved - act_on_stack(QUARTER, gconv_forward(gconv, s)))) <= 1e-9


# -- projections ---------------------------------------------------------------------

def test_projections():
    rng = np.random.default_rng(5)
    sl = rng.normal(size=(2, 5, 5))
    const = np.repeat(sl[:, None], 6, axis=1)
    assert np.allclose(project_integrate(const), 2 * np.pi * sl, rtol=1e-15, atol=0)
    assert np.array_equal(project_integrate(sl[:, None]), 2 * np.pi * sl)
    assert np.array_equal(project_max(const), sl)
    hot = np.zeros((1, 4, 3, 3))
    hot[0, 2] = np.abs(sl[0, :3, :3])
    assert np.array_equal(project_max(hot)[0], hot[0, 2])
    f = rng.normal(size=(3, 5, 4, 4))
    assert np.allclose(project_integrate(f), 2 * np.pi / 5 * sum(f[:, k] for k in range(5)), rtol=1e-14)
    assert np.array_equal(project_integrate(f, scaled=False), f.sum(axis=1))
    assert np.array_equal(project_max(f), np.maximum.reduce([f[:, k] for k in range(5)]))
    with pytest.raises(ValueError):
        ProjectLayer("mean")


@given(st.integers(0, 7), st.integers(0, 2**32 - 1))
def test_project_max_invariant_to_theta_roll(s, seed):
    f = np.random.default_rng(seed).normal(size=(2, 8, 3, 3))
    assert np.array_equal(project_max(np.roll(f, s, axis=1)), project_max(f))


# -- pipelines -----------------------------------------------------------------------

def test_pipeline_quarter_turn_equivariance():
    rng = np.random.default_rng(6)
    net = build_se2_pipeline(rng, K=4, widths=(3, 4, 2), lift_m=5, group_m=3)
    errs = [equivariance_error(net, rng.normal(size=(1, 8, 8)), QUARTER) for _ in range(20)]
    assert max(errs) <= 1e-9
    assert equivariance_error(net, rng.normal(size=(1, 8, 8)), IDENTITY) == 0.0


def test_pipeline_eighth_turn_interpolation_limited():
    rng = np.random.default_rng(0)
    net = build_se2_pipeline(rng, K=8, widths=(4, 4, 4), lift_m=7, group_m=5, smooth=True)
    g = SE2Element((0.0, 0.0), math.pi / 4)
    errs = [equivariance_error(net, band_limited_image(rng, 32), g) for _ in range(3)]
    assert max(errs) <= 0.15


def test_smooth_kernels_and_band_limited_image():
    rng = np.random.default_rng(7)
    k = smooth_kernels(rng, (3, 2), 7)
    assert k.shape == (3, 2, 7, 7)
    assert np.allclose(np.linalg.norm(k, axis=(-2, -1)), 1.0)
    assert not k[..., 0, 0].any()  # corners sit outside the window
    img = band_limited_image(rng, 16)
    assert img.shape == (1, 16, 16) and np.abs(img).max() == 1.0


def test_ring_sets_are_quarter_turn_orbits():
    sets = ring_index_sets(7, 7)
    assert sorted(i for s in sets for i in s) == list(range(49))
    idx = np.arange(49).reshape(7, 7)
    rot = np.rot90(idx)
    for s in sets:
        assert set(rot.ravel()[s]) == set(s)


def test_classifier_logits_quarter_turn_invariant():
    rng = np.random.default_rng(8)
    net = build_gcnn_classifier(rng, K=4, widths=(2, 3, 3), lift_m=5, group_m=3)
    x = rng.random((3, 1, 28, 28))
    base = net.predict(x)
    for q in (1, 2, 3):
        assert np.max(np.abs(net.predict(np.rot90(x, q, axes=(2, 3))) - base)) <= 1e-12
