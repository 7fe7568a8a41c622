"""Command-line interface: train, eval-fewshot, eval-linear, oracle, verify,
and gen-data subcommands.

Every output directory receives a run manifest (resolved configuration,
seed, input/output paths, and content hashes of the artifacts) sufficient to
reproduce the run. Exit codes are stable API: 0 success, 2 usage or config
error, 3 runtime failure, 4 corrupt artifact.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import fewshot as fs
from . import figures
from .data import AugmentationPolicy, DataError, Dataset
from .encoder import CheckpointError, init_encoder, load_encoder, save_encoder
from .graph import GraphError, build_kernel_graph, load_edge_csv, median_bandwidth
from .spectral import generalized_eigenmaps
from .train import ConfigError, MixupConfig, TrainConfig, TrainingDiverged, train
from .verify import run_all_checks

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_CORRUPT = 4

TRAIN_CONFIG_DEFAULTS = {
    "epochs": 200,
    "batch_size": 64,
    "lr0": 0.05,
    "momentum": 0.9,
    "weight_decay": 5e-4,
    "gamma": 0.005,
    "seed": 0,
    "embed_dim": 64,
    "hidden_dims": [256, 256],
    "mixup": {"enabled": True, "alpha": 2.0, "eligible_layers": [0, 1, 2]},
    "policy": {"noise_sigma": None, "scale_range": [0.8, 1.2], "mask_prob": 0.1},
    "data": {"path": None, "has_labels": False},
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, subcommand: str, config: dict, seed,
                    inputs: dict, outputs: list[Path]) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": [str(p) for p in outputs],
        "artifact_hashes": {p.name: _sha256(p) for p in outputs if p.exists()},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _merge_config(user: dict) -> dict:
    resolved = json.loads(json.dumps(TRAIN_CONFIG_DEFAULTS))
    for key, value in user.items():
        if key not in resolved:
            raise CliError(f"unknown config key: {key}", EXIT_CONFIG)
        if isinstance(resolved[key], dict):
            if not isinstance(value, dict):
                raise CliError(f"config key {key} must be an object", EXIT_CONFIG)
            for sub, sval in value.items():
                if sub not in resolved[key]:
                    raise CliError(f"unknown config key: {key}.{sub}", EXIT_CONFIG)
                resolved[key][sub] = sval
        else:
            resolved[key] = value
    return resolved


def _build_train_config(resolved: dict) -> TrainConfig:
    mix = resolved["mixup"]
    try:
        return TrainConfig(
            epochs=int(resolved["epochs"]),
            batch_size=int(resolved["batch_size"]),
            lr0=float(resolved["lr0"]),
            momentum=float(resolved["momentum"]),
            weight_decay=float(resolved["weight_decay"]),
            gamma=float(resolved["gamma"]),
            seed=int(resolved["seed"]),
            mixup=MixupConfig(
                enabled=bool(mix["enabled"]),
                alpha=float(mix["alpha"]),
                eligible_layers=tuple(int(i) for i in mix["eligible_layers"]),
            ),
        )
    except (ConfigError, TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_CONFIG) from exc


def _load_dataset_arg(path: str, has_labels: bool) -> Dataset:
    try:
        return data_mod.load_csv(path, has_label_column=has_labels)
    except (DataError, OSError) as exc:
        raise CliError(f"cannot load dataset {path}: {exc}", EXIT_CONFIG) from exc


def cmd_train(args) -> int:
    config_path = Path(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        user = json.loads(config_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {config_path}: {exc}", EXIT_CONFIG)
    resolved = _merge_config(user)
    cfg = _build_train_config(resolved)
    data_spec = resolved["data"]
    if args.data:
        data_spec = {"path": args.data, "has_labels": bool(args.has_labels)}
        resolved["data"] = data_spec
    if not data_spec.get("path"):
        raise CliError("invalid config: data.path is required", EXIT_CONFIG)
    ds = _load_dataset_arg(data_spec["path"], data_spec.get("has_labels", False))
    # Labels never reach the training loop
    train_ds = Dataset(ds.features)

    pol = resolved["policy"]
    try:
        sigma = pol["noise_sigma"]
        if sigma is None:
            sigma = 0.1 * float(train_ds.features.std(axis=0).mean())
            resolved["policy"]["noise_sigma"] = sigma
        policy = AugmentationPolicy(
            noise_sigma=float(sigma),
            scale_range=tuple(float(v) for v in pol["scale_range"]),
            mask_prob=float(pol["mask_prob"]),
        )
        dims = [train_ds.dim] + [int(h) for h in resolved["hidden_dims"]] \
            + [int(resolved["embed_dim"])]
        enc = init_encoder(dims, seed=cfg.seed)
    except (DataError, ValueError, TypeError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_CONFIG) from exc

    try:
        enc, report = train(enc, train_ds, cfg, policy)
    except TrainingDiverged as exc:
        raise CliError(str(exc), EXIT_RUNTIME) from exc
    except ConfigError as exc:
        raise CliError(f"invalid config: {exc}", EXIT_CONFIG) from exc

    ckpt = out_dir / "checkpoint.bin"
    report_csv = out_dir / "report.csv"
    fig_path = out_dir / "training.png"
    save_encoder(enc, ckpt)
    report.to_csv(report_csv)
    figures.render_training_curves(report, fig_path)
    _write_manifest(out_dir, "train", resolved, cfg.seed,
                    {"config": config_path, "data": data_spec["path"]},
                    [ckpt, report_csv, fig_path])
    print(f"trained {cfg.epochs} epochs; checkpoint at {ckpt}")
    return EXIT_OK


def _load_checkpoint_arg(path: str):
    try:
        return load_encoder(path)
    except CheckpointError as exc:
        raise CliError(f"corrupt checkpoint {path}: {exc}", EXIT_CORRUPT) from exc
    except OSError as exc:
        raise CliError(f"cannot read checkpoint {path}: {exc}", EXIT_CONFIG) from exc


def cmd_eval_fewshot(args) -> int:
    if args.episodes < 2:
        raise CliError("--episodes must be >= 2", EXIT_CONFIG)
    enc = _load_checkpoint_arg(args.checkpoint)
    ds = _load_dataset_arg(args.data, has_labels=True)
    try:
        mean, ci = fs.evaluate_fewshot(
            enc, ds, n_way=args.n_way, k_shot=args.k_shot,
            q_query=args.q_query, episodes=args.episodes, seed=args.seed,
            reg_strength=args.reg, probe_point=args.probe_point,
        )
    except fs.EvalError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    result = {
        "protocol": f"{args.n_way}-way {args.k_shot}-shot "
                    f"({args.q_query} query/class)",
        "episodes": args.episodes,
        "mean_accuracy": mean,
        "ci95": ci,
        "seed": args.seed,
        "checkpoint_path": args.checkpoint,
    }
    print(json.dumps(result, indent=2))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "fewshot.json"
    json_path.write_text(json.dumps(result, indent=2) + "\n")
    csv_path = out_dir / "fewshot.csv"
    csv_path.write_text(
        "n_way,k_shot,q_query,episodes,mean_accuracy,ci95,seed\n"
        f"{args.n_way},{args.k_shot},{args.q_query},{args.episodes},"
        f"{mean!r},{ci!r},{args.seed}\n"
    )
    _write_manifest(out_dir, "eval-fewshot", vars(args).copy() | {"func": None},
                    args.seed, {"checkpoint": args.checkpoint, "data": args.data},
                    [json_path, csv_path])
    return EXIT_OK


def cmd_eval_linear(args) -> int:
    enc = _load_checkpoint_arg(args.checkpoint)
    train_ds = _load_dataset_arg(args.train_data, has_labels=True)
    test_ds = _load_dataset_arg(args.test_data, has_labels=True)
    try:
        acc = fs.linear_evaluation(
            enc, train_ds, test_ds, epochs=args.epochs, lr0=args.lr0,
            seed=args.seed, probe_point=args.probe_point,
        )
    except fs.EvalError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    result = {
        "protocol": "linear evaluation",
        "epochs": args.epochs,
        "test_accuracy": acc,
        "seed": args.seed,
        "checkpoint_path": args.checkpoint,
    }
    print(json.dumps(result, indent=2))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "linear.json"
    json_path.write_text(json.dumps(result, indent=2) + "\n")
    _write_manifest(out_dir, "eval-linear", vars(args).copy() | {"func": None},
                    args.seed,
                    {"checkpoint": args.checkpoint,
                     "train_data": args.train_data, "test_data": args.test_data},
                    [json_path])
    return EXIT_OK


def cmd_oracle(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = None
    try:
        if args.graph:
            g = load_edge_csv(args.graph)
            source = args.graph
        else:
            ds = _load_dataset_arg(args.data, has_labels=args.has_labels)
            labels = ds.labels
            bw = args.bandwidth or median_bandwidth(ds.features)
            g = build_kernel_graph(ds.features, bw)
            source = args.data
        if args.k > g.n:
            raise CliError(f"k={args.k} exceeds vertex count {g.n}", EXIT_CONFIG)
        result = generalized_eigenmaps(g, args.k)
    except GraphError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc

    eig_path = out_dir / "eigenvalues.csv"
    eig_path.write_text(
        "".join(f"{v:.17g}\n" for v in result.eigenvalues)
    )
    emb_path = out_dir / "embedding.csv"
    with open(emb_path, "w", encoding="utf-8") as fh:
        for row in result.embedding:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    fig_path = out_dir / "embedding.png"
    figures.render_embedding_scatter(result.embedding, fig_path, labels)
    _write_manifest(out_dir, "oracle", {"k": args.k, "source": source},
                    None, {"source": source}, [eig_path, emb_path, fig_path])
    print(f"eigenvalues: {', '.join(f'{v:.6g}' for v in result.eigenvalues)}")
    print(f"residual: {result.residual:.3e}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_all_checks(fast=args.fast)
    all_ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name}: {r.detail}")
        all_ok = all_ok and r.passed
    if not all_ok:
        first = next(r.name for r in results if not r.passed)
        print(f"verification failed: {first}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_gen_data(args) -> int:
    try:
        if args.kind == "blobs":
            ds = data_mod.generate_blobs(args.classes, args.per_class,
                                         args.dim, args.separation, args.seed)
        elif args.kind == "moons":
            ds = data_mod.generate_moons(args.per_class, args.noise, args.seed)
        elif args.kind == "rings":
            ds = data_mod.generate_rings(args.classes, args.per_class,
                                         args.noise, args.seed)
        else:
            raise CliError(f"unknown dataset kind {args.kind}", EXIT_CONFIG)
    except DataError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    data_mod.save_csv(ds, out)
    print(f"wrote {ds.n} x {ds.dim} dataset ({ds.class_count} classes) to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lapembed",
        description="Graph-spectral self-supervised representation learning "
                    "at desk scale: training, spectral oracle, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an encoder from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data", help="override config data.path")
    p.add_argument("--has-labels", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-fewshot", help="episode evaluation of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="labeled dataset CSV")
    p.add_argument("--n-way", type=int, default=5)
    p.add_argument("--k-shot", type=int, default=1)
    p.add_argument("--q-query", type=int, default=15)
    p.add_argument("--episodes", type=int, default=600)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reg", type=float, default=1.0)
    p.add_argument("--probe-point", choices=("backbone", "embedding"),
                   default="backbone")
    p.add_argument("--out", default="eval_out")
    p.set_defaults(func=cmd_eval_fewshot)

    p = sub.add_parser("eval-linear", help="linear probe on frozen features")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train-data", required=True)
    p.add_argument("--test-data", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr0", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probe-point", choices=("backbone", "embedding"),
                   default="backbone")
    p.add_argument("--out", default="eval_out")
    p.set_defaults(func=cmd_eval_linear)

    p = sub.add_parser("oracle", help="exact spectral embedding of a graph "
                                      "or kernel graph of a dataset")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph", help="edge-triple CSV")
    src.add_argument("--data", help="dataset CSV (kernel graph)")
    p.add_argument("--has-labels", action="store_true")
    p.add_argument("--bandwidth", type=float,
                   help="kernel width (default: median 7th-nearest-neighbour distance)")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", default="oracle_out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="run the identity suites")
    p.add_argument("--fast", action="store_true",
                   help="reduced trial counts for quick smoke runs")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-data", help="write a synthetic labeled dataset")
    p.add_argument("--kind", choices=("blobs", "moons", "rings"), required=True)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (GraphError, DataError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
