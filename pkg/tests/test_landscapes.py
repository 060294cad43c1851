import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqgrad.errors import ContractError
from eqgrad.landscapes import (LANDSCAPES, TRAJECTORY_CONFIGS, landscape_eval, read_csv, run_grid, run_trajectory,
                               write_csv, write_heatmap_ppm)
from eqgrad.optim import KINDS, make_optimizer


def central_grad(kind, w, h=1e-6):
    out = np.zeros(2)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        out[i] = (landscape_eval(kind, w + e)[0] - landscape_eval(kind, w - e)[0]) / (2 * h)
    return out


@pytest.mark.parametrize("kind", LANDSCAPES)
def test_gradients_match_central_differences(kind):
    rng = np.random.default_rng(0)
    worst = 0.0
    for w in rng.uniform(-2.5, 2.5, size=(1000, 2)):
        worst = max(worst, np.max(np.abs(landscape_eval(kind, w)[1] - central_grad(kind, w))))
    assert worst <= 1e-6


def test_critical_points():
    loss, grad = landscape_eval("canyon", (0, 0))
    assert loss == 0 and not grad.any()
    loss, grad = landscape_eval("saddle", (0, 0))
    assert loss == 0 and not grad.any()
    h = 1e-3
    curv = [(landscape_eval("saddle", e)[0] + landscape_eval("saddle", -np.array(e))[0]) / h**2
            for e in ((h, 0.0), (0.0, h))]
    assert curv[0] > 0 > curv[1]  # indefinite Hessian
    assert not landscape_eval("saddle", (0, np.sqrt(5)))[1].round(12).any()
    with pytest.raises(ContractError):
        landscape_eval("bowl", (0, 0))


def test_zero_gradient_start_is_constant():
    traj = run_trajectory("canyon", make_optimizer("adam"), w0=(0.0, 0.0), steps=20)
    assert len(traj.points) == 21
    assert all(not w.any() and loss == 0 for w, loss in traj.points)


def test_divergence_flag_above_stability_threshold():
    bad = run_trajectory("canyon", make_optimizer("sgd", lr=0.021), steps=2000)
    assert bad.diverged and bad.diverged_at is not None
    assert len(bad.points) == bad.diverged_at + 1
    good = run_trajectory("canyon", make_optimizer("sgd", lr=0.019), steps=2000)
    assert not good.diverged
    losses = [loss for _, loss in good.points]
    assert all(b < a for a, b in zip(losses, losses[1:]) if a > 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-4, 0.019))
def test_canyon_sgd_monotone_below_threshold(lr):
    losses = [loss for _, loss in run_trajectory("canyon", make_optimizer("sgd", lr=lr), steps=200).points]
    assert all(b <= a for a, b in zip(losses, losses[1:]))


def test_documented_configs_adam_beats_sgd_on_canyon():
    sgd = run_trajectory("canyon", "sgd").final_loss
    adam = run_trajectory("canyon", "adam").final_loss
    assert adam < sgd
    assert TRAJECTORY_CONFIGS["sgd"] == {"lr": 0.001}


def test_errors():
    with pytest.raises(ContractError):
        run_trajectory("canyon", "sgd", steps=0)
    with pytest.raises(ContractError):
        run_trajectory("canyon", "sgd", w0=(np.inf, 0.0))


def test_grid_is_deterministic_and_csv_roundtrips(tmp_path):
    a = run_grid(tmp_path / "a", steps=50)
    run_grid(tmp_path / "b", steps=50)
    assert len(a) == len(LANDSCAPES) * len(KINDS) == 20
    for kind in LANDSCAPES:
        for opt in KINDS:
            name = f"{kind}_{opt}.csv"
            raw = (tmp_path / "a" / name).read_bytes()
            assert raw == (tmp_path / "b" / name).read_bytes()
            assert raw.startswith(b"step,w1,w2,loss\n")
            rows = read_csv(tmp_path / "a" / name)
            traj = a[kind, opt]
            assert [r[0] for r in rows] == list(range(len(traj.points)))
            assert all(r[1] == w[0] and r[2] == w[1] and r[3] == loss for r, (w, loss) in zip(rows, traj.points))


def test_csv_rejects_other_files(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ContractError):
        read_csv(p)
    traj = run_trajectory("plateau", "momentum", steps=3)
    write_csv(traj, p)
    assert p.read_text().count("\n") == 5


def test_heatmap_ppm(tmp_path):
    p = tmp_path / "h.ppm"
    write_heatmap_ppm("obstacle", p, [run_trajectory("obstacle", "sgd", steps=10)], size=32)
    raw = p.read_bytes()
    header = b"P6 32 32 255\n"
    assert raw.startswith(header) and len(raw) == len(header) + 32 * 32 * 3
