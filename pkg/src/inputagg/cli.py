"""Command-line interface.

Exit codes: 0 success, 1 numerical or training failure, 2 usage error
(bad flags, missing or malformed files, refusing to overwrite).
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io, linalg, manifold
from .errors import (DegenerateInputError, DomainError, NumericalError, SymmetryError,
                     TrainingError)
from .evaluate import calibrate_threshold, evaluate_open_set
from .gradcheck import aggregation_gradcheck
from .mapping import PretrainConfig
from .optim import OptimizerConfig
from .synth import SynthConfig, synth_generate
from .train import StageConfigs, build_model, pretrain_mapping, train_three_stage

log = logging.getLogger("inputagg")

SEED_ENV = "INPUTAGG_SEED"
PATH_OPTIONS = {"config", "out", "data", "init", "model", "gallery", "probe", "history", "a", "b"}


class UsageError(Exception):
    pass


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _existing(path):
    if not Path(path).is_file():
        raise UsageError(f"no such file: {path}")
    return path


def _writable(path, force):
    if Path(path).exists() and not force:
        raise UsageError(f"refusing to overwrite {path} (pass --force)")
    return path


def _echo(args):
    return {k: v for k, v in sorted(vars(args).items())
            if k not in PATH_OPTIONS and k not in ("func", "command", "force", "log_level")}


def _add_common(p, seed):
    p.add_argument("--seed", type=int, default=seed, help=f"random seed (env {SEED_ENV})")
    p.add_argument("--config", help="JSON file of option defaults; explicit flags win")
    p.add_argument("--workers", type=int, default=1, help="worker threads for per-video work")
    p.add_argument("--force", action="store_true", help="allow overwriting output files")
    p.add_argument("--log-level", default="WARNING")


def _add_model_args(p):
    g = p.add_argument_group("model")
    g.add_argument("--pooling", choices=["aggregation", "mean"], default="aggregation")
    g.add_argument("--embedder", choices=["passthrough", "linear", "small-mlp"], default="passthrough")
    g.add_argument("--feature-dim", type=int, default=32, help="embedder output dim")
    g.add_argument("--n-train", type=int, default=16, help="frames per video after resampling")
    g.add_argument("--q", type=int, default=None, help="transpose-FC output vectors (default n-train)")
    g.add_argument("--t", type=int, default=1, help="pooling groups")
    g.add_argument("--embed-dim", type=int, default=None, help="mapping output dim")


def _add_optim_args(p, stage_defaults):
    g = p.add_argument_group("optimizer")
    g.add_argument("--lr", type=float, default=0.01)
    g.add_argument("--power", type=float, default=0.05)
    g.add_argument("--momentum", type=float, default=0.9)
    g.add_argument("--weight-decay", type=float, default=0.0005)
    g.add_argument("--batch-videos", type=int, default=12)
    g.add_argument("--eta", type=float, default=0.0, help="auto-encoder weight penalty")
    for stage, default in stage_defaults.items():
        g.add_argument(f"--{stage}-iters", type=int, default=default)


def _opt(args, iters, stage):
    return OptimizerConfig(base_lr=args.lr, power=args.power, momentum=args.momentum,
                           weight_decay=args.weight_decay, max_iter=iters,
                           batch_videos=args.batch_videos, n_train=args.n_train,
                           seed=args.seed + stage)


def _new_model(args, videos):
    labels = sorted({v.label for v in videos})
    return build_model(videos[0].frames.shape[1], labels, args.pooling, args.embedder,
                       args.feature_dim, args.n_train, args.q, args.t, args.embed_dim, args.seed)


def _print(doc):
    print(json.dumps(doc, indent=2, sort_keys=True))


def cmd_gradcheck(args):
    if args.t < 1 or args.q % args.t:
        raise UsageError(f"q={args.q} must be divisible by t={args.t}")
    report = aggregation_gradcheck(args.d, args.n, args.q, args.t, args.seed, args.eps)
    worst = max(report, key=lambda k: report[k]["rel_error"])
    err = report[worst]["rel_error"]
    passed = err <= args.tol
    _print({"max_rel_error": err, "tol": args.tol, "passed": passed,
            "worst_param": worst, "params": report})
    return 0 if passed else 1


def cmd_synth(args):
    cfg = SynthConfig(n_classes=args.classes, subspace_dim=args.subspace_dim, dim=args.dim,
                      train_per_class=args.train_per_class,
                      gallery_per_class=args.gallery_per_class,
                      probe_per_class=args.probe_per_class, frames_min=args.frames_min,
                      frames_max=args.frames_max, noise=args.noise,
                      unknown_fraction=args.unknown_fraction, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = ["train.jsonl", "gallery.jsonl", "probe.jsonl", "synth.json"]
    for name in names:
        _writable(out / name, args.force)
    train, gallery, probe = synth_generate(cfg)
    io.write_dataset(out / "train.jsonl", train)
    io.write_dataset(out / "gallery.jsonl", gallery)
    io.write_dataset(out / "probe.jsonl", probe)
    io.write_json(out / "synth.json", cfg.to_dict())
    return 0


def _read_training(path):
    videos = io.read_dataset(_existing(path))
    if not videos:
        raise UsageError(f"{path} holds no videos")
    return videos


def cmd_pretrain_map(args):
    videos = _read_training(args.data)
    _writable(args.out, args.force)
    if args.history:
        _writable(args.history, args.force)
    model = _new_model(args, videos)
    model, history = pretrain_mapping(model, videos, _opt(args, args.stage2_iters, 2),
                                      PretrainConfig(args.eta))
    io.save_model(args.out, model)
    if args.history:
        io.write_json(args.history, {"stage2": history, "config": _echo(args)})
    _print({"iterations": len(history),
            "initial_loss": history[0] if history else None,
            "final_loss": history[-1] if history else None})
    return 0


def cmd_train(args):
    videos = _read_training(args.data)
    _writable(args.out, args.force)
    if args.history:
        _writable(args.history, args.force)
    model = io.load_model(_existing(args.init)) if args.init else _new_model(args, videos)
    stages = StageConfigs(_opt(args, args.stage1_iters, 1), _opt(args, args.stage2_iters, 2),
                          _opt(args, args.stage3_iters, 3))
    model, history = train_three_stage(videos, model, stages, PretrainConfig(args.eta),
                                       workers=args.workers)
    io.save_model(args.out, model)
    if args.history:
        io.write_json(args.history, {**history, "config": _echo(args)})
    _print({"train_accuracy": history["train_accuracy"],
            "final_loss": history["stage3"][-1] if history["stage3"] else None})
    return 0


def cmd_eval(args):
    model = io.load_model(_existing(args.model))
    gallery = io.read_dataset(_existing(args.gallery))
    probe = io.read_dataset(_existing(args.probe))
    if args.out:
        _writable(args.out, args.force)
    if args.threshold == "auto":
        threshold = calibrate_threshold(model, gallery, args.quantile, args.workers)
    else:
        try:
            threshold = float(args.threshold)
        except ValueError:
            raise UsageError(f"--threshold must be a number or 'auto', got {args.threshold!r}") from None
    metrics = evaluate_open_set(model, gallery, probe, threshold, args.mode,
                                args.unknown_label, args.workers)
    doc = {**metrics, "config": _echo(args)}
    if args.out:
        io.write_json(args.out, doc)
    _print(doc)
    return 0


def cmd_dist(args):
    A = linalg.read_matrix(_existing(args.a))
    B = linalg.read_matrix(_existing(args.b))
    if args.metric == "logeuclid":
        d = manifold.log_euclidean_distance(A, B)
    else:
        if args.subspace_dim is not None:
            A = manifold.grassmann_basis(A, args.subspace_dim)
            B = manifold.grassmann_basis(B, args.subspace_dim)
        else:
            for name, Y in (("A", A), ("B", B)):
                gram = Y.T @ Y
                if linalg.frobenius_norm(gram - np.eye(Y.shape[1])) > 1e-8:
                    raise UsageError(f"{name} is not an orthonormal basis; pass --subspace-dim "
                                     "to treat inputs as feature matrices")
        d = manifold.grassmann_distance(A, B)
    print(f"{d:.12g}")
    return 0


def build_parser(seed=0):
    parser = argparse.ArgumentParser(prog="inputagg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("gradcheck", help="finite-difference check of the aggregation unit")
    _add_common(p, seed)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--q", type=int, default=4)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--eps", type=float, default=1e-5, help="finite-difference step")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="generate a synthetic train/gallery/probe split")
    _add_common(p, seed)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--subspace-dim", type=int, default=3)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--train-per-class", type=int, default=12)
    p.add_argument("--gallery-per-class", type=int, default=4)
    p.add_argument("--probe-per-class", type=int, default=4)
    p.add_argument("--frames-min", type=int, default=8)
    p.add_argument("--frames-max", type=int, default=32)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--unknown-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain-map", help="auto-encoder pretraining of the mapping unit")
    _add_common(p, seed)
    p.add_argument("--data", required=True, help="training dataset (.jsonl)")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--history", help="optional loss-history JSON")
    _add_model_args(p)
    _add_optim_args(p, {"stage2": 2000})
    p.set_defaults(func=cmd_pretrain_map)

    p = sub.add_parser("train", help="three-stage training")
    _add_common(p, seed)
    p.add_argument("--data", required=True, help="training dataset (.jsonl)")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--init", help="start from this model file instead of a fresh one")
    p.add_argument("--history", help="optional loss-history JSON")
    _add_model_args(p)
    _add_optim_args(p, {"stage1": 0, "stage2": 2000, "stage3": 5000})
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="open-set identification metrics")
    _add_common(p, seed)
    p.add_argument("--model", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--probe", required=True)
    p.add_argument("--out", help="metrics JSON output")
    p.add_argument("--threshold", default="auto",
                   help="reject threshold on the top posterior, or 'auto'")
    p.add_argument("--quantile", type=float, default=0.05,
                   help="gallery-score quantile used by --threshold auto")
    p.add_argument("--mode", choices=["threshold", "unknown_class"], default="threshold")
    p.add_argument("--unknown-label", default="unknown")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dist", help="distance between two matrices")
    _add_common(p, seed)
    p.add_argument("--metric", choices=["logeuclid", "grassmann"], required=True)
    p.add_argument("--subspace-dim", type=int, default=None,
                   help="grassmann: treat inputs as feature matrices and take this many top eigenvectors")
    p.add_argument("a", metavar="A.mat")
    p.add_argument("b", metavar="B.mat")
    p.set_defaults(func=cmd_dist)
    return parser


def _apply_config(parser, argv):
    # first pass finds --config; its values become defaults for the second pass
    args = parser.parse_args(argv)
    if not args.config:
        return args
    path = _existing(args.config)
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except ValueError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from None
    sub = parser.subcommands[args.command]
    known = {a.dest for a in sub._actions}
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - known - {"help"})
    if unknown:
        raise UsageError(f"{path}: unknown option(s) {', '.join(unknown)}")
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None):
    try:
        parser = build_parser(_default_seed())
        args = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"inputagg: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DomainError, SymmetryError, DegenerateInputError, NumericalError,
            TrainingError, FloatingPointError) as exc:
        print(f"inputagg {args.command}: numerical error: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ValueError, OSError) as exc:
        print(f"inputagg {args.command}: error: {exc}", file=sys.stderr)
        return 2


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
