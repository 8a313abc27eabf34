"""Command-line driver: precompute, train, eval, verify, sparsity, ablate-agg, bench.

Reports go to ``--out`` or stdout as JSON. Wall times go to stderr so that
the JSON written by seeded commands stays byte-identical across runs.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import fcntl
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bench, pipeline
from .errors import FormatError, InputError, LightDiCError, StaleCacheError, VerificationFailure
from .formats import read_cache, read_checkpoint, read_split, write_cache, write_checkpoint, write_split
from .model import LinearModel, assemble_inputs, evaluate
from .propagation import Aggregation, aggregate, propagate
from .splits import TaskKind
from .verify import run_verify

CACHE_ENV = "LIGHTDIC_CACHE"
DEFAULT_CACHE_DIR = "lightdic_cache"
MANIFEST = "manifest.json"
FEATURES_FILE = "features.ldcp"
SPLIT_FILE = "split.txt"
MODEL_FILE = "model.ldcw"

PRIMARY_METRIC = {
    TaskKind.NODE: "accuracy",
    TaskKind.EXISTENCE: "auc",
    TaskKind.DIRECTION: "macro_f1",
    TaskKind.THREE_CLASS: "accuracy",
}

# flag dest -> config key
CONFIG_FLAGS = {
    "edges": "edges", "features": "features", "labels": "labels", "npz": "npz",
    "num_nodes": "num_nodes", "task": "task", "q": "q", "K": "K", "agg": "agg",
    "lr": "lr", "batch_size": "batch_size", "epochs": "epochs",
    "weight_decay": "weight_decay", "seed": "seed", "patience": "patience",
    "per_class_train": "per_class_train", "val_count": "val_count",
    "train_frac": "train_frac", "val_frac": "val_frac", "spectral_k": "spectral_k",
    "threads": "threads", "cache_dir": "cache_dir", "out": "out",
}


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _timing(**seconds):
    print(json.dumps({"timing_seconds": seconds}, sort_keys=True), file=sys.stderr)


def _overrides(args) -> dict:
    values = {key: getattr(args, dest, None) for dest, key in CONFIG_FLAGS.items()}
    if getattr(args, "unsafe_ranges", False):
        values["unsafe_ranges"] = True
    if getattr(args, "no_bias", False):
        values["use_bias"] = False
    return values


def _config(args) -> pipeline.PipelineConfig:
    cfg = pipeline.load_config(getattr(args, "config", None), _overrides(args))
    if getattr(args, "cache_dir", None) is None and os.environ.get(CACHE_ENV):
        cfg.cache_dir = os.environ[CACHE_ENV]
    if cfg.cache_dir is None:
        cfg.cache_dir = DEFAULT_CACHE_DIR
    return cfg


def _explicit_keys(args) -> set:
    keys = set()
    if getattr(args, "config", None):
        keys |= set(pipeline.parse_config_text(Path(args.config).read_text(encoding="utf-8")))
    keys |= {k for k, v in _overrides(args).items() if v is not None}
    return keys


@contextlib.contextmanager
def cache_lock(cache_dir):
    """Advisory exclusive lock on a cache directory."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    with open(cache_dir / ".lock", "w") as fh:
        try:
            fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            raise LightDiCError(f"cache directory {cache_dir} is locked by another process") from None
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def _read_manifest(entry: Path) -> dict:
    try:
        return json.loads((entry / MANIFEST).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FormatError(f"{entry}: no cache manifest; run precompute first") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{entry / MANIFEST}: corrupt manifest ({exc})") from None


def _entry_is_complete(entry: Path, fingerprint: int) -> bool:
    if not all((entry / name).is_file() for name in (MANIFEST, FEATURES_FILE, SPLIT_FILE)):
        return False
    try:
        return int(_read_manifest(entry)["graph_fingerprint"], 16) == fingerprint
    except (FormatError, KeyError, ValueError):
        return False


def _write_atomic(path: Path, writer):
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


# commands

def cmd_precompute(args) -> int:
    cfg = _config(args).validate()
    pipeline.check_inputs_exist(cfg)
    with cache_lock(cfg.cache_dir):
        graph, X, labels = pipeline.load_dataset(cfg)
        fp = graph.fingerprint()
        chash = pipeline.config_hash(cfg)
        entry = Path(cfg.cache_dir) / f"{chash}-{fp:016x}"
        report = {"cache": str(entry), "config_hash": chash, "graph_fingerprint": f"{fp:016x}"}
        if _entry_is_complete(entry, fp):
            print(f"cache hit: {entry}", file=sys.stderr)
            _emit({**report, "status": "cache_hit"}, cfg.out)
            return 0
        t0 = time.perf_counter()
        split = pipeline.build_split(graph, labels, cfg)
        agg = pipeline.precompute(graph, X, split, cfg)
        elapsed = time.perf_counter() - t0
        # the cache is keyed on the full graph
        agg.fingerprint = fp
        entry.mkdir(parents=True, exist_ok=True)
        _write_atomic(entry / FEATURES_FILE, lambda p: write_cache(agg, p))
        _write_atomic(entry / SPLIT_FILE, lambda p: write_split(split, p))
        manifest = {
            "config_hash": chash,
            "graph_fingerprint": f"{fp:016x}",
            "task": split.task_kind.value,
            "num_classes": split.num_classes,
            "n": agg.n,
            "width": agg.width,
            "q": cfg.q,
            "K": cfg.K,
            "agg": agg.config.aggregation.value,
            "seed": cfg.seed,
            "split_sizes": split.sizes(),
        }
        _write_atomic(entry / MANIFEST, lambda p: p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n"))
    print(f"preprocess time: {elapsed:.3f} s", file=sys.stderr)
    _timing(preprocess=elapsed)
    _emit({**report, "status": "computed", "n": agg.n, "width": agg.width, "split_sizes": split.sizes()}, cfg.out)
    return 0


def _resolve_entry(args, cfg) -> Path:
    if getattr(args, "cache", None):
        entry = Path(args.cache)
        return entry.parent if entry.name == MANIFEST else entry
    chash = pipeline.config_hash(cfg)
    root = Path(cfg.cache_dir)
    matches = sorted(root.glob(f"{chash}-*")) if root.is_dir() else []
    if not matches:
        raise FormatError(f"no cache for this configuration under {root}; run precompute first")
    if len(matches) > 1:
        raise FormatError(f"several caches match this configuration; pick one with --cache: {matches}")
    return matches[0]


def _load_cached(entry: Path, explicit: dict | None = None):
    """Manifest, features and split of a cache entry; no graph is read."""
    manifest = _read_manifest(entry)
    try:
        fp = int(manifest["graph_fingerprint"], 16)
    except (KeyError, ValueError):
        raise FormatError(f"{entry / MANIFEST}: missing graph fingerprint") from None
    agg = read_cache(entry / FEATURES_FILE, expected_fingerprint=fp)
    stored = {"q": agg.config.q, "K": agg.config.K, "agg": agg.config.aggregation.value}
    for key, value in stored.items():
        if manifest.get(key) != value:
            raise StaleCacheError(f"{entry}: features were built with {key}={value}, manifest says {manifest.get(key)}")
    for key, value in (explicit or {}).items():
        if key == "agg":
            value = Aggregation(value).value
        if key in stored and stored[key] != value:
            raise StaleCacheError(f"{entry}: cache has {key}={stored[key]}, configuration asks for {value}")
    split = read_split(entry / SPLIT_FILE)
    if split.task_kind.value != manifest.get("task") or (explicit or {}).get("task", split.task_kind.value) != split.task_kind.value:
        raise StaleCacheError(f"{entry}: split task does not match the request")
    return manifest, agg, split


def cmd_train(args) -> int:
    cfg = _config(args)
    if not cfg.unsafe_ranges and not pipeline.LR_RANGE[0] <= cfg.lr <= pipeline.LR_RANGE[1]:
        raise InputError(f"lr={cfg.lr} outside search range {pipeline.LR_RANGE}; pass --unsafe-ranges to allow")
    entry = _resolve_entry(args, cfg)
    explicit = {k: getattr(cfg, k) for k in _explicit_keys(args) & {"q", "K", "agg", "task"}}
    with cache_lock(entry.parent):
        manifest, agg, split = _load_cached(entry, explicit)
        t0 = time.perf_counter()
        model, losses, metrics = pipeline.fit(agg, split, cfg.train_config())
        elapsed = time.perf_counter() - t0
        ckpt = Path(args.checkpoint) if args.checkpoint else entry / MODEL_FILE
        _write_atomic(ckpt, lambda p: write_checkpoint(p, model.W, model.bias))
    _timing(train=elapsed, per_epoch=elapsed / max(len(losses), 1))
    tcfg = dataclasses.asdict(cfg.train_config())
    _emit({
        "cache": str(entry),
        "checkpoint": str(ckpt),
        "task": split.task_kind.value,
        "train_config": tcfg,
        "epochs_run": len(losses),
        "per_epoch_loss": losses,
        "metrics": metrics,
    }, cfg.out)
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    entry = _resolve_entry(args, cfg)
    _, agg, split = _load_cached(entry)
    ckpt = Path(args.checkpoint) if args.checkpoint else entry / MODEL_FILE
    if not ckpt.is_file():
        raise InputError(f"checkpoint {ckpt} not found")
    model = LinearModel(*read_checkpoint(ckpt))
    data = assemble_inputs(agg, split)
    metrics = {}
    for name in (args.subset,) if args.subset != "all" else data:
        X, y = data[name]
        if y.size:
            metrics[name] = pipeline.report_dict(evaluate(model, X, y, split.task_kind))
    _emit({"cache": str(entry), "checkpoint": str(ckpt), "task": split.task_kind.value, "metrics": metrics}, cfg.out)
    return 0


def cmd_verify(args) -> int:
    if not 2 <= args.scale <= 64:
        raise InputError(f"scale={args.scale} must lie in [2, 64]")
    if args.trials < 0:
        raise InputError("trials must be >= 0")
    if args.trials == 0:
        print("warning: trials=0, every check passes vacuously", file=sys.stderr)
    t0 = time.perf_counter()
    result = run_verify(args.scale, args.trials, args.seed)
    _timing(verify=time.perf_counter() - t0)
    _emit(result, args.out)
    if not result["passed"]:
        failed = [c["name"] for c in result["checks"] if not c["passed"]]
        raise VerificationFailure(f"failed checks: {', '.join(failed)}")
    return 0


def _parse_levels(text, axis):
    try:
        levels = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"cannot parse levels {text!r}") from None
    if not levels:
        raise InputError("no levels given")
    if axis == "label":
        if any(lv < 1 or lv != int(lv) for lv in levels):
            raise InputError("label levels are per-class training counts (positive integers)")
        return [int(lv) for lv in levels]
    if any(not 0.0 <= lv <= 1.0 for lv in levels):
        raise InputError(f"{axis} levels must lie in [0, 1]")
    return levels


def drop_edges(graph, fraction: float, seed: int):
    """Remove ``round(fraction * m)`` uniformly chosen edges."""
    if fraction == 0.0:
        return graph
    src, dst = graph.edges()
    rng = np.random.default_rng([seed, 1])
    keep = np.sort(rng.permutation(graph.m)[int(round(fraction * graph.m)):])
    return graph.with_edges(src[keep], dst[keep])


def mask_unlabeled_features(X, train_nodes, fraction: float, seed: int):
    """Zero ``round(fraction * count)`` randomly chosen rows outside the training set."""
    X = np.array(X, dtype=np.float64)
    unlabeled = np.setdiff1d(np.arange(X.shape[0]), train_nodes)
    rng = np.random.default_rng([seed, 2])
    chosen = rng.permutation(unlabeled)[: int(round(fraction * unlabeled.size))]
    X[chosen] = 0.0
    return X


def sparsity_sweep(graph, X, labels, cfg, axis: str, levels) -> list:
    if cfg.task_kind is not TaskKind.NODE:
        raise InputError("sparsity experiments need a node classification task")
    base = pipeline.build_split(graph, labels, cfg)
    rows = []
    for level in levels:
        if axis == "edge":
            g = drop_edges(graph, level, cfg.seed)
            metrics = pipeline.run_pipeline(g, X, labels, cfg, dataclasses.replace(base, propagation_graph=g))
        elif axis == "feature":
            Xm = mask_unlabeled_features(pipeline.node_inputs(graph, X, cfg), base.train, level, cfg.seed)
            metrics = pipeline.run_pipeline(graph, Xm, labels, cfg, base)
        elif axis == "label":
            metrics = pipeline.run_pipeline(graph, X, labels, cfg.replace(per_class_train=level))
        else:
            raise InputError(f"unknown axis {axis!r}")
        rows.append({
            "level": level,
            "val_accuracy": metrics.get("val", {}).get("accuracy"),
            "test_accuracy": metrics["test"]["accuracy"],
            "test_macro_f1": metrics["test"]["macro_f1"],
        })
    return rows


def cmd_sparsity(args) -> int:
    cfg = _config(args).validate()
    levels = _parse_levels(args.levels, args.axis)
    graph, X, labels = pipeline.load_dataset(cfg)
    rows = sparsity_sweep(graph, X, labels, cfg, args.axis, levels)
    _emit({"axis": args.axis, "task": cfg.task, "levels": rows}, cfg.out)
    return 0


def ablate_aggregation(graph, X, labels, cfg) -> dict:
    """Metrics for all four aggregations over one shared split and propagation."""
    split = pipeline.build_split(graph, labels, cfg)
    prop_graph = split.propagation_graph or graph
    steps = propagate(prop_graph, pipeline.node_inputs(prop_graph, X, cfg), cfg.propagation_config(), threads=cfg.threads)
    metric = PRIMARY_METRIC[split.task_kind]
    modes = {}
    for mode in Aggregation:
        _, _, metrics = pipeline.fit(aggregate(steps, mode), split, cfg.train_config())
        modes[mode.value] = metrics
    ranking = sorted(modes, key=lambda m: -(modes[m]["test"].get(metric) or 0.0))
    return {"task": split.task_kind.value, "metric": metric, "modes": modes, "ranking": ranking}


def cmd_ablate(args) -> int:
    cfg = _config(args).validate()
    graph, X, labels = pipeline.load_dataset(cfg)
    _emit(ablate_aggregation(graph, X, labels, cfg), cfg.out)
    return 0


def cmd_bench(args) -> int:
    out = {
        "propagation": bench.bench_propagation(args.n, args.m, args.f, args.K, args.repeats, args.seed, args.threads or 1),
        "training": bench.bench_epoch(args.n, args.m, args.f, args.K, epochs=args.bench_epochs,
                                      repeats=args.repeats, seed=args.seed),
    }
    _emit(out, args.out)
    return 0


# parser

def _add_pipeline_flags(p, training=True):
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--edges")
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--npz", help="graph archive in the cora_ml.npz layout")
    p.add_argument("--num-nodes", type=int)
    p.add_argument("--task", choices=[t.value for t in TaskKind])
    p.add_argument("--q", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--agg", choices=[a.value for a in Aggregation])
    p.add_argument("--seed", type=int)
    p.add_argument("--per-class-train", type=int)
    p.add_argument("--val-count", type=int)
    p.add_argument("--train-frac", type=float)
    p.add_argument("--val-frac", type=float)
    p.add_argument("--spectral-k", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--cache-dir")
    p.add_argument("--out")
    p.add_argument("--unsafe-ranges", action="store_true", help="allow K and lr outside the search ranges")
    if training:
        p.add_argument("--lr", type=float)
        p.add_argument("--batch-size", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--weight-decay", type=float)
        p.add_argument("--patience", type=int)
        p.add_argument("--no-bias", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lightdic", description="Decoupled magnetic-operator pipeline for digraphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("precompute", help="propagate and cache aggregated features")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_precompute)

    for name, func, helptext in (
        ("train", cmd_train, "train from a cache entry"),
        ("eval", cmd_eval, "score a checkpoint on a cache entry"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_pipeline_flags(p)
        p.add_argument("--cache", help="cache entry directory (defaults to the one matching the config)")
        p.add_argument("--checkpoint", help=f"checkpoint path (default <cache>/{MODEL_FILE})")
        if name == "eval":
            p.add_argument("--subset", choices=["train", "val", "test", "all"], default="all")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="randomized checks against the dense oracle")
    p.add_argument("--scale", type=int, default=30)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sparsity", help="accuracy under missing edges, features or labels")
    _add_pipeline_flags(p)
    p.add_argument("--axis", choices=["feature", "edge", "label"], required=True)
    p.add_argument("--levels", required=True, help="comma separated levels")
    p.set_defaults(func=cmd_sparsity)

    p = sub.add_parser("ablate-agg", help="compare last, mean, sum and concat")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="propagation and epoch timings at m and 2m edges")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--m", type=int, default=1_000_000)
    p.add_argument("--f", type=int, default=64)
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--bench-epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LightDiCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
