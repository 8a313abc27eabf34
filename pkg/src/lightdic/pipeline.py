"""In-memory pipeline: load a dataset, precompute aggregated features, fit and score.

The three stages are kept separate so the CLI can cache the first two and
train from the cache alone.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .datasets import load_npz_graph
from .errors import InputError, ValidationError
from .features import spectral_features
from .formats import read_features, read_labels
from .graph import DirectedGraph, load_edge_list
from .magnetic import check_q
from .model import LinearModel, TrainConfig, assemble_inputs, design_width, evaluate, train
from .propagation import DEFAULT_MATERIALIZE_BYTES, PropagationConfig, aggregation, propagate_aggregate
from .splits import TaskKind, TaskSplit, build_link_split, build_node_split, task_kind

# hyperparameter search ranges; outside them only with unsafe_ranges
Q_RANGE = (0.0, 0.25)
K_RANGE = (2, 10)
LR_RANGE = (0.001, 0.1)

# keys that change the cached features or split
PRECOMPUTE_KEYS = (
    "task", "q", "K", "agg", "seed", "per_class_train", "val_count",
    "train_frac", "val_frac", "spectral_k",
)
TRAIN_KEYS = ("lr", "batch_size", "epochs", "weight_decay", "seed", "patience", "use_bias")


@dataclass
class PipelineConfig:
    edges: str | None = None
    features: str | None = None
    labels: str | None = None
    npz: str | None = None
    num_nodes: int | None = None
    task: str = TaskKind.NODE.value
    q: float = 0.25
    K: int = 2
    agg: str = "last"
    lr: float = 0.01
    batch_size: int = 5000
    epochs: int = 200
    weight_decay: float = 0.0
    seed: int = 0
    patience: int = 50
    use_bias: bool = True
    per_class_train: int = 20
    val_count: int = 500
    train_frac: float = 0.80
    val_frac: float = 0.15
    spectral_k: int = 16
    threads: int = 1
    max_materialize_bytes: int = DEFAULT_MATERIALIZE_BYTES
    cache_dir: str | None = None
    out: str | None = None
    unsafe_ranges: bool = False

    def validate(self) -> "PipelineConfig":
        task_kind(self.task)
        aggregation(self.agg)
        check_q(self.q)
        if self.threads < 1:
            raise InputError("threads must be >= 1")
        if not self.unsafe_ranges:
            if not K_RANGE[0] <= self.K <= K_RANGE[1]:
                raise InputError(f"K={self.K} outside search range {K_RANGE}; pass --unsafe-ranges to allow")
            if not LR_RANGE[0] <= self.lr <= LR_RANGE[1]:
                raise InputError(f"lr={self.lr} outside search range {LR_RANGE}; pass --unsafe-ranges to allow")
        self.propagation_config()
        self.train_config()
        return self

    @property
    def task_kind(self) -> TaskKind:
        return task_kind(self.task)

    def propagation_config(self) -> PropagationConfig:
        return PropagationConfig(q=self.q, K=self.K, aggregation=self.agg)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.lr, batch_size=self.batch_size, epochs=self.epochs,
            weight_decay=self.weight_decay, seed=self.seed, patience=self.patience,
            use_bias=self.use_bias,
        )

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key, raw):
    kind = _FIELD_TYPES[key]
    try:
        if "bool" in kind:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise InputError(f"config key {key!r}: cannot parse {raw!r}") from None
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise InputError(f"{source}: line {lineno}: expected 'key = value'")
        if key not in _FIELD_TYPES:
            raise InputError(f"{source}: line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return values


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise InputError(f"config file {p} not found")
        values = parse_config_text(p.read_text(encoding="utf-8"), str(p))
        base = p.parent
        for key in ("edges", "features", "labels", "npz"):
            if values.get(key) and not Path(values[key]).is_absolute():
                values[key] = str(base / values[key])
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return PipelineConfig(**values)


def _file_digest(path) -> str:
    h = hashlib.blake2b(digest_size=8)
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(cfg: PipelineConfig) -> str:
    """Digest of everything besides the graph that determines the cached artefacts."""
    payload = {k: getattr(cfg, k) for k in PRECOMPUTE_KEYS}
    payload["agg"] = aggregation(cfg.agg).value
    for key in ("features", "labels", "npz"):
        path = getattr(cfg, key)
        payload[key] = _file_digest(path) if path else None
    text = json.dumps(payload, sort_keys=True)
    return hashlib.blake2b(text.encode(), digest_size=8).hexdigest()


def _load_array(path, labels=False):
    if str(path).endswith(".npy"):
        return np.load(path, allow_pickle=False)
    return read_labels(path) if labels else read_features(path)


def check_inputs_exist(cfg: PipelineConfig, keys=("edges", "features", "labels", "npz")):
    for key in keys:
        path = getattr(cfg, key)
        if path is not None and not Path(path).is_file():
            raise InputError(f"{key} file {path} not found")


def load_dataset(cfg: PipelineConfig):
    """Returns ``(graph, X or None, labels or None)``."""
    check_inputs_exist(cfg)
    X = labels = None
    if cfg.npz:
        graph, X, labels = load_npz_graph(cfg.npz)
    elif cfg.edges:
        graph = load_edge_list(cfg.edges, cfg.num_nodes)
    else:
        raise InputError("no graph given; set 'edges' or 'npz'")
    if cfg.features:
        X = _load_array(cfg.features)
    if cfg.labels:
        labels = _load_array(cfg.labels, labels=True)
    if X is not None and X.shape[0] != graph.n:
        raise ValidationError(f"features have {X.shape[0]} rows, graph has {graph.n} nodes")
    if cfg.task_kind is TaskKind.NODE and labels is None:
        raise InputError("node classification needs labels")
    return graph, X, labels


def build_split(graph: DirectedGraph, labels, cfg: PipelineConfig) -> TaskSplit:
    kind = cfg.task_kind
    if kind is TaskKind.NODE:
        return build_node_split(graph, labels, cfg.per_class_train, cfg.val_count, cfg.seed)
    return build_link_split(graph, kind, cfg.train_frac, cfg.val_frac, cfg.seed)


def node_inputs(graph: DirectedGraph, X, cfg: PipelineConfig):
    """Raw features, or spectral features of the graph when none are given."""
    if X is not None:
        return X
    k = min(cfg.spectral_k, graph.n)
    return spectral_features(graph, k, seed=cfg.seed)


def precompute(graph: DirectedGraph, X, split: TaskSplit, cfg: PipelineConfig):
    """Aggregated features over the split's propagation graph."""
    prop_graph = split.propagation_graph or graph
    return propagate_aggregate(
        prop_graph, node_inputs(prop_graph, X, cfg), cfg.propagation_config(),
        threads=cfg.threads, max_materialize_bytes=cfg.max_materialize_bytes,
    )


def _clean(value):
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def report_dict(report) -> dict:
    out = {"accuracy": report.accuracy, "macro_f1": report.macro_f1}
    if report.auc is not None:
        out["auc"] = _clean(report.auc)
    return out


def fit(agg, split: TaskSplit, cfg: TrainConfig):
    """Train on the cached features; returns ``(model, losses, {subset: metrics})``."""
    data = assemble_inputs(agg, split)
    model = LinearModel.zeros(design_width(agg.width, split.task_kind), split.num_classes, cfg.use_bias)
    Xv, yv = data["val"]
    model, losses = train(model, *data["train"], cfg, val=(Xv, yv) if yv.size else None)
    metrics = {}
    for name, (X, y) in data.items():
        if y.size:
            metrics[name] = report_dict(evaluate(model, X, y, split.task_kind))
    return model, losses, metrics


def run_pipeline(graph, X, labels, cfg: PipelineConfig, split: TaskSplit | None = None) -> dict:
    """All three stages in memory; returns per-subset metrics."""
    if split is None:
        split = build_split(graph, labels, cfg)
    agg = precompute(graph, X, split, cfg)
    _, _, metrics = fit(agg, split, cfg.train_config())
    return metrics
