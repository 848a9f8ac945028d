"""Command-line front end.

Commands: synth, train, eval, bench, gradcheck. Every command echoes its
resolved configuration into the output directory, so any run can be
reproduced from its artifacts. Exit codes: 0 success, 1 verification
failure, 2 usage or I/O error.

A flat key=value config file can seed any command's options via --config;
explicit flags win. The SENSORCOND_OUTDIR environment variable provides the
default output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

log = logging.getLogger("sensorcond")

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2


def _default_outdir() -> str:
    return os.environ.get("SENSORCOND_OUTDIR", "runs")


def _read_config_file(path: str) -> dict:
    """Flat key=value lines; '#' starts a comment; keys may use - or _."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, val = line.split("=", 1)
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _coerce(parser: argparse.ArgumentParser, values: dict) -> dict:
    """Map config-file strings onto parser defaults with type coercion."""
    actions = {a.dest: a for a in parser._actions}
    out = {}
    for key, raw in values.items():
        if key not in actions:
            raise ValueError(f"unknown config key {key!r}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            out[key] = raw.lower() in ("1", "true", "yes", "on")
        elif action.nargs in ("+", "*"):
            typ = action.type or str
            out[key] = [typ(v) for v in raw.replace(",", " ").split()]
        else:
            typ = action.type or str
            out[key] = typ(raw)
    return out


def _echo_config(outdir: Path, command: str, args: argparse.Namespace) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command,
               "config": {k: v for k, v in vars(args).items() if k != "func"}}
    (outdir / "run_config.json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _load_splits(data_dir: str) -> dict:
    from .data import load_dataset
    splits = load_dataset(data_dir)
    missing = [n for n in ("train", "val", "finetune", "test") if n not in splits]
    if missing:
        raise ValueError(f"{data_dir}: dataset is missing splits {missing}; "
                         "generate with `sensorcond synth` or convert with the scripts/ tools")
    return splits


# synth ----------------------------------------------------------------------

def cmd_synth(args) -> int:
    from .autodiff import RngStream
    from .data import (SynthConfig, bundle_digest, save_dataset, split,
                       synth_generate)

    cfg = SynthConfig(task=args.task, sensors=args.sensors, num_classes=args.classes,
                      instances=args.instances, length=args.length, seed=args.seed)
    ds = synth_generate(cfg)
    train, val, finetune, test = split(ds, rng=RngStream(args.seed).split("split"))
    splits = {"train": train, "val": val, "finetune": finetune, "test": test}
    outdir = Path(args.out)
    save_dataset(splits, outdir)
    _echo_config(outdir, "synth", args)
    digest = bundle_digest(splits)
    print(f"dataset written to {outdir}")
    print(f"splits: " + ", ".join(f"{k}={len(v)}" for k, v in splits.items()))
    print(f"data digest: {digest:016x}")
    return EXIT_OK


# train ----------------------------------------------------------------------

def _model_config(args, task, num_classes):
    from .models import ModelConfig
    return ModelConfig(
        variant=args.variant, task=task, num_classes=num_classes,
        embed_width=args.embed_width, hidden=args.hidden, layers=args.layers,
        head_hidden=args.head_hidden, dropout=args.dropout)


def _train_config(args):
    from .training import TrainConfig
    return TrainConfig(
        seed=args.seed, max_epochs=args.epochs, batch_size=args.batch_size,
        patience=args.patience, finetune_epochs=args.finetune_epochs,
        finetune_batch=args.finetune_batch, finetune_patience=args.finetune_patience,
        embed_lr=args.embed_lr, net_lr=args.net_lr)


def build_plan(catalog, f_tr: float, seed: int):
    """The deterministic plan shared by train and eval for a (f_tr, seed)."""
    from .autodiff import RngStream
    from .data import generate_combinations
    return generate_combinations(catalog, f_tr, rng=RngStream(seed).split(("plan", f_tr)))


def cmd_train(args) -> int:
    from .data import bundle_digest, compute_stats
    from .training import save_checkpoint, train

    splits = _load_splits(args.data)
    train_ds, val_ds = splits["train"], splits["val"]
    task = train_ds.task

    if args.variant == "gru-a":
        if args.f_tr is not None:
            log.warning("--f-tr is ignored for gru-a: all sensors are always available")
        plan = None
        f_tr = 0.0
    else:
        f_tr = args.f_tr if args.f_tr is not None else 0.25
        plan = build_plan(train_ds.catalog, f_tr, args.seed)

    stats = compute_stats(train_ds)
    model_cfg = _model_config(args, task.kind, task.num_classes)
    train_cfg = _train_config(args)

    started = time.time()
    ckpt, history = train(train_ds, val_ds, plan, model_cfg, train_cfg, stats)
    elapsed = time.time() - started
    ckpt.meta.update({"f_tr": f_tr, "data_digest": f"{bundle_digest(splits):016x}"})

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _echo_config(outdir, "train", args)
    save_checkpoint(ckpt, outdir / "checkpoint.bin")
    with open(outdir / "history.jsonl", "w") as fh:
        for row in history:
            fh.write(json.dumps(row) + "\n")
    print(f"trained {args.variant} for {len(history)} epochs in {elapsed:.1f}s")
    print(f"best val loss {ckpt.best_val_loss:.6f} at epoch {ckpt.best_epoch}")
    print(f"checkpoint: {outdir / 'checkpoint.bin'}")
    return EXIT_OK


# eval -----------------------------------------------------------------------

def cmd_eval(args) -> int:
    from .autodiff import RngStream
    from .benchmark import (EvalProtocol, fine_tune_eval, overlap_fine_tune_eval,
                            scratch_eval, zero_shot_eval)
    from .data import compute_stats
    from .training import load_checkpoint, training_assignments

    ckpt_path = Path(args.checkpoint)
    if not ckpt_path.exists():
        print(f"checkpoint not found: {ckpt_path}", file=sys.stderr)
        return EXIT_USAGE
    ckpt = load_checkpoint(ckpt_path)

    splits = _load_splits(args.data)
    train_ds, test_ds = splits["train"], splits["test"]
    stats = compute_stats(train_ds)
    seed = args.seed if args.seed is not None else ckpt.train_config.get("seed", 0)
    f_tr = args.f_tr if args.f_tr is not None else float(ckpt.meta.get("f_tr", 0.25))

    plan = None
    if ckpt.variant != "gru-a":
        plan = build_plan(train_ds.catalog, f_tr, seed)

    protocol = EvalProtocol(f_te=tuple(args.f_te), combos_per_fte=args.combos,
                            modes=(args.mode,), keep_predictions=True)
    rng = RngStream(seed).split(("cli-eval", args.mode))

    # fine-tuning settings: checkpoint echo, overridden by explicit flags
    from .training import TrainConfig
    merged = dict(ckpt.train_config)
    merged["seed"] = seed
    for src, dst in (("epochs", "max_epochs"), ("batch_size", "batch_size"),
                     ("patience", "patience"), ("finetune_epochs", "finetune_epochs"),
                     ("finetune_batch", "finetune_batch"),
                     ("finetune_patience", "finetune_patience"),
                     ("embed_lr", "embed_lr"), ("net_lr", "net_lr")):
        val = getattr(args, src, None)
        if val is not None:
            merged[dst] = val
    train_cfg = TrainConfig(**merged)

    if args.mode == "zero-shot" or ckpt.variant == "gru-a":
        records = zero_shot_eval(ckpt, test_ds, stats, plan, protocol, rng)
    elif args.mode == "fine-tune":
        records = fine_tune_eval(ckpt, splits["finetune"], test_ds, stats, plan,
                                 protocol, train_cfg, rng)
    elif args.mode == "overlap-fine-tune":
        assignment, _ = training_assignments(len(train_ds.instances),
                                             len(splits["val"].instances), plan, seed)
        records = overlap_fine_tune_eval(ckpt, train_ds, assignment, test_ds, stats,
                                         plan, protocol, train_cfg, rng)
    else:  # scratch
        records = scratch_eval(ckpt.model_config, splits["finetune"], test_ds, stats,
                               plan, protocol, train_cfg, rng)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _echo_config(outdir, "eval", args)
    with open(outdir / "eval_records.jsonl", "w") as fh:
        for rec in records:
            row = dict(rec)
            row.update({"variant": ckpt.variant, "mode": args.mode, "seed": seed, "f_tr": f_tr})
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    metric = "error_rate" if test_ds.task.kind == "classification" else "rmse"
    print(f"{ckpt.variant} {args.mode} ({metric}):")
    by_fte: dict = {}
    for rec in records:
        by_fte.setdefault(rec["f_te"], []).append(rec["value"])
    for f_te, values in sorted(by_fte.items()):
        print(f"  f_te={f_te:g}: mean {np.mean(values):.3f} over {len(values)} combination(s)")
    print(f"records: {outdir / 'eval_records.jsonl'}")
    return EXIT_OK


# bench ----------------------------------------------------------------------

def cmd_bench(args) -> int:
    from .autodiff import RngStream
    from .benchmark import BenchConfig, EvalProtocol, render_table, run_benchmark
    from .data import SynthConfig, split, synth_generate

    if args.data:
        splits = _load_splits(args.data)
        dataset_name = Path(args.data).name
    else:
        cfg = SynthConfig(task=args.task, sensors=args.sensors, num_classes=args.classes,
                          instances=args.instances, length=args.length, seed=args.data_seed)
        ds = synth_generate(cfg)
        tr, va, ft, te = split(ds, rng=RngStream(args.data_seed).split("split"))
        splits = {"train": tr, "val": va, "finetune": ft, "test": te}
        dataset_name = "synthetic"

    from .benchmark.runner import DESK_SCALE_MODEL, DESK_SCALE_TRAIN

    protocol = EvalProtocol(f_te=tuple(args.f_te), combos_per_fte=args.combos,
                            modes=tuple(args.modes), keep_predictions=args.predictions)
    # unset flags fall back to the desk-scale grid presets
    model_overrides = dict(DESK_SCALE_MODEL)
    for key in ("hidden", "layers", "embed_width", "head_hidden", "dropout"):
        val = getattr(args, key)
        if val is not None:
            model_overrides[key] = val
    train_overrides = dict(DESK_SCALE_TRAIN)
    for src, dst in (("epochs", "max_epochs"), ("batch_size", "batch_size"),
                     ("patience", "patience"), ("finetune_epochs", "finetune_epochs"),
                     ("finetune_batch", "finetune_batch"),
                     ("finetune_patience", "finetune_patience"),
                     ("embed_lr", "embed_lr"), ("net_lr", "net_lr")):
        val = getattr(args, src)
        if val is not None:
            train_overrides[dst] = val

    config = BenchConfig(
        dataset_name=dataset_name, variants=tuple(args.variants),
        f_tr=tuple(args.f_tr), seeds=tuple(args.seeds), protocol=protocol,
        model=model_overrides, train=train_overrides,
        plan_base=args.plan_base, plan_total=args.plan_total,
        outdir=args.out, jobs=args.jobs, write_csv=args.csv)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _echo_config(outdir, "bench", args)
    started = time.time()
    report = run_benchmark(splits, config)
    print(render_table(report))
    print(f"\nfinished in {time.time() - started:.1f}s; artifacts in {outdir}")
    if report.failures:
        return EXIT_VERIFICATION
    return EXIT_OK


# gradcheck ------------------------------------------------------------------

def cmd_gradcheck(args) -> int:
    from .autodiff import backend_name
    from .verification import run_all

    results, passed = run_all(args.seed)
    print(f"kernel backend: {backend_name()}")
    for r in results:
        status = "PASS" if r["error"] < r["threshold"] else "FAIL"
        print(f"  {r['name']:<18} max rel err {r['error']:.3e}  "
              f"(tolerance {r['threshold']:.0e})  {status}")
    print("gradient suite:", "PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_VERIFICATION


# parser ---------------------------------------------------------------------

def _add_synth_flags(p):
    p.add_argument("--task", choices=["classification", "regression"],
                   default="classification")
    p.add_argument("--sensors", type=int, default=12, help="catalog size d")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--instances", type=int, default=800)
    p.add_argument("--length", type=int, default=32)


def _add_model_flags(p, with_defaults: bool):
    d = (lambda v: v) if with_defaults else (lambda v: None)
    p.add_argument("--hidden", type=int, default=d(128))
    p.add_argument("--layers", type=int, default=d(3))
    p.add_argument("--embed-width", type=int, default=None)
    p.add_argument("--head-hidden", type=int, default=None)
    p.add_argument("--dropout", type=float, default=d(0.2))


def _add_train_flags(p, with_defaults: bool):
    d = (lambda v: v) if with_defaults else (lambda v: None)
    p.add_argument("--epochs", type=int, default=d(150))
    p.add_argument("--batch-size", type=int, default=d(64))
    p.add_argument("--patience", type=int, default=d(20))
    p.add_argument("--finetune-epochs", type=int, default=d(50))
    p.add_argument("--finetune-batch", type=int, default=d(32))
    p.add_argument("--finetune-patience", type=int, default=d(10))
    p.add_argument("--embed-lr", type=float, default=d(5e-4))
    p.add_argument("--net-lr", type=float, default=d(1e-4))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sensorcond",
        description="Train and benchmark sensor-set-conditioned recurrent models.")
    parser.add_argument("--config", default=None,
                        help="flat key=value file; explicit flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset directory")
    _add_synth_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="dataset directory to create")
    p.set_defaults(func=cmd_synth, out_kind="data")

    p = sub.add_parser("train", help="train one variant on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--variant", choices=["gru", "gru-se", "gru-cm", "gru-a"],
                   default="gru-cm")
    p.add_argument("--f-tr", type=float, default=None,
                   help="fraction of sensors masked per training combination")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    _add_model_flags(p, with_defaults=True)
    _add_train_flags(p, with_defaults=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on unseen combinations")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=["zero-shot", "fine-tune", "overlap-fine-tune",
                                      "scratch"], default="zero-shot")
    p.add_argument("--f-te", type=float, nargs="+", default=[0.1, 0.25, 0.4, 0.5])
    p.add_argument("--combos", type=int, default=5,
                   help="combinations sampled per f_te")
    p.add_argument("--f-tr", type=float, default=None,
                   help="override the plan fraction recorded in the checkpoint")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_train_flags(p, with_defaults=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run the full benchmark grid")
    p.add_argument("--data", default=None, help="dataset directory (default: synthetic)")
    _add_synth_flags(p)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--variants", nargs="+", default=["gru", "gru-se", "gru-cm", "gru-a"],
                   choices=["gru", "gru-se", "gru-cm", "gru-a"])
    p.add_argument("--f-tr", type=float, nargs="+", default=[0.25, 0.4])
    p.add_argument("--f-te", type=float, nargs="+", default=[0.1, 0.25, 0.4, 0.5])
    p.add_argument("--modes", nargs="+", default=["zero-shot", "fine-tune"],
                   choices=["zero-shot", "fine-tune", "overlap-fine-tune", "scratch"])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--combos", type=int, default=5)
    p.add_argument("--plan-base", type=int, default=16,
                   help="base training combinations per plan")
    p.add_argument("--plan-total", type=int, default=64,
                   help="total training combinations per plan")
    p.add_argument("--jobs", type=int, default=1, help="parallel cell jobs")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--no-predictions", dest="predictions", action="store_false",
                   help="drop raw per-instance predictions from cell markers")
    p.set_defaults(predictions=True)
    p.add_argument("--out", default=None)
    _add_model_flags(p, with_defaults=False)
    _add_train_flags(p, with_defaults=False)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gradcheck", help="finite-difference verification of all gradients")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.config:
        try:
            file_values = _read_config_file(args.config)
        except (OSError, ValueError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        # re-parse with file values as defaults so explicit flags still win
        sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        subparser = sub.choices[args.command]
        try:
            subparser.set_defaults(**_coerce(subparser, file_values))
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        args = parser.parse_args(argv)

    if hasattr(args, "out") and args.out is None:
        args.out = str(Path(_default_outdir()) / args.command)

    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
