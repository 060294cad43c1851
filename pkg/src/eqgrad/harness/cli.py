"""Command-line entry point: ``eqgrad <command> [flags]`` (or ``python -m eqgrad``)."""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from ..errors import EqgradError
from ..optim import DEFAULTS, KINDS

DEFAULT_DATA = "tests/data/mnist5k"


def _widths(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


# Adam step size for the G-CNN when --lr is omitted (its max-pooled features train slowly at 0.001)
GCNN_ADAM_LR = 0.003


def _hyper(args) -> dict:
    names = {"lr": args.lr, "beta1": args.beta1, "beta2": args.beta2, "alpha": args.alpha, "mu": args.mu,
             "eps": args.eps}
    allowed = DEFAULTS[args.opt]
    return {k: v for k, v in names.items() if v is not None and k in allowed}


def _add_opt_flags(p: argparse.ArgumentParser, default: str, choices=KINDS) -> None:
    p.add_argument("--opt", choices=choices, default=default)
    p.add_argument("--lr", type=float, default=None, help="learning rate (optimizer default if omitted)")
    p.add_argument("--beta1", type=float, default=None)
    p.add_argument("--beta2", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None, help="RMSProp decay")
    p.add_argument("--mu", type=float, default=None, help="momentum coefficient")
    p.add_argument("--eps", type=float, default=None)


def _load_split(args):
    from .data import SplitConfig, load_idx, split_dataset

    data = load_idx(args.data)
    if getattr(args, "subset", 0):
        pick = np.random.default_rng(args.seed).permutation(len(data))[: args.subset]
        data = data.subset(np.sort(pick))
    return split_dataset(data, SplitConfig(args.split, args.seed))


def cmd_train(args) -> int:
    from .train import TrainConfig, build_model, train

    train_set, test_set = _load_split(args)
    config = {"model": args.model}
    if args.init:
        config["init"] = args.init
    if args.model == "gcnn":
        config.update(K=args.K, widths=_widths(args.widths))
    model = build_model(config, np.random.default_rng(args.seed))
    hyper = _hyper(args)
    if args.model == "gcnn" and args.opt == "adam" and args.lr is None:
        hyper["lr"] = GCNN_ADAM_LR
    cfg = TrainConfig(batch_size=args.batch_size, epochs=args.epochs, optimizer=args.opt, hyper=hyper,
                      loss=args.loss, seed=args.seed, checkpoint=args.out)
    meta = {"config": config, "hyper": hyper, "split": args.split, "seed": args.seed, "subset": args.subset, "loss": args.loss}
    print(f"{args.model}: {model.n_parameters()} parameters, {len(train_set)} train / {len(test_set)} test")
    start = time.time()
    history = train(model, train_set, test_set, cfg, meta=meta, log=print)
    best = min(history, key=lambda r: r.test_loss)
    print(f"best epoch {best.epoch}: test loss {best.test_loss:.4f}, accuracy {best.test_accuracy:.4f} "
          f"({time.time() - start:.1f}s); checkpoint {args.out}")
    return 0


def cmd_eval(args) -> int:
    from .checkpoint import checkpoint_load, read_checkpoint
    from .data import SplitConfig, load_idx, split_dataset
    from .train import build_model, evaluate

    meta, _ = read_checkpoint(args.ckpt)
    model = build_model(meta["config"], np.random.default_rng(0))
    checkpoint_load(model, args.ckpt)
    data = load_idx(args.data)
    if not args.all:
        seed = meta.get("seed", 0)
        if meta.get("subset"):
            pick = np.random.default_rng(seed).permutation(len(data))[: meta["subset"]]
            data = data.subset(np.sort(pick))
        _, data = split_dataset(data, SplitConfig(meta.get("split", 0.8), seed))
    if args.rotate:
        data = data.rotated(args.rotate)
    loss, acc = evaluate(model, data, meta.get("loss", "nll"))
    print(json.dumps({"samples": len(data), "accuracy": acc, "test_loss": loss}))
    return 0


def cmd_gradcheck(args) -> int:
    from ..checks import CASES, run_all

    groups = {
        "all": list(CASES),
        "autograd": [t for t in CASES if not t.startswith(("se2-", "net:gcnn"))],
        "gcnn": [t for t in CASES if t.startswith(("se2-", "net:gcnn"))],
    }
    results = run_all(groups[args.module], trials=args.trials, h=args.h)
    width = max(map(len, results))
    worst = 0.0
    for tag, err in results.items():
        worst = max(worst, err)
        print(f"{tag:<{width}}  {err:.3e}  {'ok' if err <= args.tol else 'FAIL'}")
    print(f"{'max':<{width}}  {worst:.3e}")
    return 0 if worst <= args.tol else 1


def cmd_equivariance(args) -> int:
    from ..gcnn.group import SE2Element
    from ..gcnn.layers import ProjectLayer
    from ..gcnn.model import band_limited_image, build_se2_pipeline, equivariance_error
    from ..layers.module import Sequential

    angle = {"quarter": math.pi / 2, "eighth": math.pi / 4}[args.angle]
    g = SE2Element((0.0, 0.0), angle)
    rng = np.random.default_rng(args.seed)
    if args.ckpt:
        from .checkpoint import checkpoint_load, read_checkpoint
        from .train import build_model

        meta, _ = read_checkpoint(args.ckpt)
        model = build_model(meta["config"], rng)
        checkpoint_load(model, args.ckpt)
        cut = next(i for i, layer in enumerate(model.layers) if isinstance(layer, ProjectLayer))
        net = Sequential(*model.layers[: cut + 1])
        size = 28
        print(f"feature map of {args.ckpt} (layers up to the projection)")
    else:
        net = build_se2_pipeline(rng, K=args.K, widths=(4, 4, 4), lift_m=7, group_m=5, smooth=True)
        size = 32
    errs = [equivariance_error(net, band_limited_image(rng, size=size), g) for _ in range(args.trials)]
    print(f"K={args.K if not args.ckpt else meta['config'].get('K')} angle={args.angle}: "
          f"max relative error {max(errs):.3e}, mean {np.mean(errs):.3e} over {args.trials} inputs")
    return 0


def cmd_landscape(args) -> int:
    from ..landscapes import LANDSCAPES, TRAJECTORY_CONFIGS, run_trajectory, write_csv, write_heatmap_ppm
    from ..optim import make_optimizer

    kinds = LANDSCAPES if args.kind == "all" else (args.kind,)
    opts = KINDS if args.opt == "all" else (args.opt,)
    many = len(kinds) * len(opts) > 1
    out = Path(args.out)
    if many:
        out.mkdir(parents=True, exist_ok=True)
    for kind in kinds:
        trajs = []
        for opt in opts:
            hyper = dict(TRAJECTORY_CONFIGS[opt])
            if not many or args.lr is not None:
                hyper.update(_hyper(argparse.Namespace(**{**vars(args), "opt": opt})))
            traj = run_trajectory(kind, make_optimizer(opt, **hyper), steps=args.steps)
            trajs.append(traj)
            path = out / f"{kind}_{opt}.csv" if many else out
            write_csv(traj, path)
            flag = f"  DIVERGED at step {traj.diverged_at}" if traj.diverged else ""
            print(f"{kind:9s} {opt:9s} final loss {traj.final_loss:.6g}  -> {path}{flag}")
        if args.ppm:
            ppm = Path(args.ppm)
            target = ppm / f"{kind}.ppm" if len(kinds) > 1 else ppm
            write_heatmap_ppm(kind, target, trajs)
    return 0


def cmd_idx_dump(args) -> int:
    from .idx import idx_summary

    print(json.dumps(idx_summary(args.file)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eqgrad", description="Train and probe small CNNs and SE(2) G-CNNs.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on IDX data")
    p.add_argument("--model", choices=("lenet5", "gcnn"), default="lenet5")
    p.add_argument("--data", default=DEFAULT_DATA, help="directory with images/labels IDX files")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=32)
    _add_opt_flags(p, "adam")
    p.add_argument("--init", choices=("xavier", "he", "relu", "sigmoid"), default=None,
                   help="initializer (lenet5: xavier, gcnn: he when omitted)")
    p.add_argument("--loss", choices=("nll", "l2"), default="nll")
    p.add_argument("--split", type=float, default=0.8, help="train fraction")
    p.add_argument("--subset", type=int, default=0, help="use this many samples (0 = all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--K", type=int, default=8, help="orientations (gcnn)")
    p.add_argument("--widths", default="8,16,16", help="channel widths (gcnn)")
    p.add_argument("--out", default="model.ckpt")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy and loss of a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", default=DEFAULT_DATA)
    p.add_argument("--all", action="store_true", help="evaluate every sample, not the stored test split")
    p.add_argument("--rotate", type=int, default=0, help="quarter turns applied to the images")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--module", choices=("all", "autograd", "gcnn"), default="all")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--h", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("equivariance", help="relative equivariance error under a rotation")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--ckpt", default=None)
    src.add_argument("--random", action="store_true", help="random smooth-kernel network (default)")
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--angle", choices=("quarter", "eighth"), default="quarter")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_equivariance)

    p = sub.add_parser("landscape", help="optimizer trajectories on a 2-D test surface")
    p.add_argument("--kind", choices=("canyon", "saddle", "plateau", "obstacle", "all"), default="canyon")
    _add_opt_flags(p, "sgd", KINDS + ("all",))
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--out", default="trajectory.csv", help="CSV file, or a directory when several runs")
    p.add_argument("--ppm", default=None, help="also write a heatmap (file, or directory for --kind all)")
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("idx-dump", help="print an IDX file header")
    p.add_argument("--file", required=True)
    p.set_defaults(func=cmd_idx_dump)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EqgradError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
