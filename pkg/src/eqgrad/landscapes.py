"""Two-parameter test surfaces and optimizer trajectories over them.

=========  ===============================================  ==================
kind       loss(w1, w2)                                     default start
=========  ===============================================  ==================
canyon     (100 w1^2 + w2^2) / 2                            (1, 1)
saddle     w1^2 - w2^2 + 0.1 w2^4                           (1, 0.01)
plateau    H q / (1 + q),  q = |w|^2 / r^2,  H=1, r=0.5     (2, 1.5)
obstacle   |w|^2 / 2 + A exp(-|w - c|^2 / (2 s^2)),         (2, 2.2)
           A=2, c=(1, 1.1), s=0.3
=========  ===============================================  ==================

The canyon's stiff axis has curvature 100, so plain SGD is stable for
lr < 2/100. The saddle has minima at w2 = +-sqrt(5). The plateau is almost
flat once |w| >> r. The obstacle bump sits just off the straight path from
its start to the minimum at the origin.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError
from .optim import KINDS, OptimizerState, make_optimizer, step

LANDSCAPES = ("canyon", "saddle", "plateau", "obstacle")

PLATEAU_HEIGHT, PLATEAU_RADIUS = 1.0, 0.5
OBSTACLE_HEIGHT, OBSTACLE_CENTER, OBSTACLE_WIDTH = 2.0, (1.0, 1.1), 0.3
DIVERGE_NORM = 1e6

START = {"canyon": (1.0, 1.0), "saddle": (1.0, 0.01), "plateau": (2.0, 1.5), "obstacle": (2.0, 2.2)}

# Comparison-grid configs. Adaptive methods move each coordinate by about lr
# per step, so at lr = 0.001 they cannot cross a unit distance in 500 steps;
# they get lr = 0.01 here, SGD and momentum keep 0.001 (canyon-stable).
TRAJECTORY_CONFIGS = {
    "sgd": {"lr": 0.001},
    "momentum": {"lr": 0.001, "mu": 0.9},
    "adagrad": {"lr": 0.1},
    "rmsprop": {"lr": 0.01},
    "adam": {"lr": 0.01},
}


def landscape_eval(kind: str, w) -> tuple[float, np.ndarray]:
    """Loss and analytic gradient at w."""
    w1, w2 = (float(v) for v in w)
    if kind == "canyon":
        return 0.5 * (100 * w1 * w1 + w2 * w2), np.array([100 * w1, w2])
    if kind == "saddle":
        return w1 * w1 - w2 * w2 + 0.1 * w2**4, np.array([2 * w1, -2 * w2 + 0.4 * w2**3])
    if kind == "plateau":
        q = (w1 * w1 + w2 * w2) / PLATEAU_RADIUS**2
        dq = PLATEAU_HEIGHT / (1 + q) ** 2 * 2 / PLATEAU_RADIUS**2
        return PLATEAU_HEIGHT * q / (1 + q), np.array([dq * w1, dq * w2])
    if kind == "obstacle":
        c1, c2 = OBSTACLE_CENTER
        d1, d2 = w1 - c1, w2 - c2
        bump = OBSTACLE_HEIGHT * math.exp(-(d1 * d1 + d2 * d2) / (2 * OBSTACLE_WIDTH**2))
        k = -bump / OBSTACLE_WIDTH**2
        return 0.5 * (w1 * w1 + w2 * w2) + bump, np.array([w1 + k * d1, w2 + k * d2])
    raise ContractError(f"unknown landscape {kind!r}; choose from {', '.join(LANDSCAPES)}")


@dataclass
class Trajectory:
    kind: str
    optimizer: str
    points: list[tuple[np.ndarray, float]] = field(default_factory=list)
    diverged: bool = False
    diverged_at: int | None = None

    @property
    def final_loss(self) -> float:
        return self.points[-1][1]


def run_trajectory(kind: str, state: OptimizerState | str, w0=None, steps: int = 500) -> Trajectory:
    """Iterate the optimizer from w0; stops early at the first divergent iterate."""
    if steps < 1:
        raise ContractError("steps must be >= 1")
    if isinstance(state, str):
        state = make_optimizer(state, **TRAJECTORY_CONFIGS[state])
    w = np.array(START[kind] if w0 is None else w0, dtype=float)
    loss, grad = landscape_eval(kind, w)
    if not (math.isfinite(loss) and np.isfinite(w).all()):
        raise ContractError("trajectory must start at a finite point")
    traj = Trajectory(kind, state.kind, [(w.copy(), loss)])
    for i in range(1, steps + 1):
        (w,) = step(state, [w], [grad])
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grad = landscape_eval(kind, w)
        traj.points.append((w.copy(), loss))
        if not math.isfinite(loss) or not np.isfinite(w).all() or np.linalg.norm(w) > DIVERGE_NORM:
            traj.diverged, traj.diverged_at = True, i
            break
    return traj


def write_csv(traj: Trajectory, path) -> None:
    """Header ``step,w1,w2,loss``; floats in repr form (round-trip, '.' decimal)."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["step", "w1", "w2", "loss"])
        for i, (w, loss) in enumerate(traj.points):
            out.writerow([i, repr(float(w[0])), repr(float(w[1])), repr(float(loss))])


def read_csv(path) -> list[tuple[int, float, float, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["step", "w1", "w2", "loss"]:
        raise ContractError(f"{path} is not a trajectory CSV")
    return [(int(r[0]), float(r[1]), float(r[2]), float(r[3])) for r in rows[1:]]


def run_grid(out_dir, steps: int = 500, kinds=LANDSCAPES, optimizers=KINDS) -> dict[tuple[str, str], Trajectory]:
    """Every (landscape, optimizer) pair with the default configs; one CSV each."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = {}
    for kind in kinds:
        for opt in optimizers:
            traj = run_trajectory(kind, opt, steps=steps)
            write_csv(traj, out / f"{kind}_{opt}.csv")
            result[kind, opt] = traj
    return result


_COLORS = [(230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200), (245, 130, 48)]


def write_heatmap_ppm(kind: str, path, trajectories=(), extent=(-2.5, 2.5, -2.5, 2.5), size: int = 256) -> None:
    """Binary PPM of log(1 + loss - min) with trajectory points drawn on top."""
    x0, x1, y0, y1 = extent
    xs = np.linspace(x0, x1, size)
    ys = np.linspace(y1, y0, size)  # top row = largest w2
    z = np.array([[landscape_eval(kind, (a, b))[0] for a in xs] for b in ys])
    z = np.log1p(z - z.min())
    gray = (255 * (1 - z / max(z.max(), 1e-12))).astype(np.uint8)
    img = np.repeat(gray[:, :, None], 3, axis=2)
    for n, traj in enumerate(trajectories):
        color = _COLORS[n % len(_COLORS)]
        for w, _ in traj.points:
            c = int(round((w[0] - x0) / (x1 - x0) * (size - 1)))
            r = int(round((y1 - w[1]) / (y1 - y0) * (size - 1)))
            if 0 <= r < size and 0 <= c < size:
                img[r, c] = color
    with open(path, "wb") as fh:
        fh.write(f"P6 {size} {size} 255\n".encode("ascii"))
        fh.write(img.tobytes())
