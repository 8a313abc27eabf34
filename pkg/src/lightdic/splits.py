"""Train/val/test construction for node classification and the three link tasks.

Link tasks work on ordered node pairs. Labels:

* ``link_existence``: 1 for an edge ``(u, v)``, 0 for a sampled ordered
  non-edge (pairs whose reverse is an edge still count as non-edges).
* ``link_direction``: for a one-way edge ``(u, v)``, the pair ``(u, v)`` gets 0
  and ``(v, u)`` gets 1.
* ``link_three_class``: 0 for ``(u, v)`` in E, 1 for ``(v, u)`` in E, 2 when
  neither orientation is an edge; equal counts per class.

Only training edges survive in ``propagation_graph``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InputError, InsufficientDataError
from .graph import DirectedGraph

SUBSETS = ("train", "val", "test")


class TaskKind(str, enum.Enum):
    NODE = "node_classification"
    EXISTENCE = "link_existence"
    DIRECTION = "link_direction"
    THREE_CLASS = "link_three_class"

    @property
    def is_link(self) -> bool:
        return self is not TaskKind.NODE

    @property
    def num_classes(self):
        return {TaskKind.EXISTENCE: 2, TaskKind.DIRECTION: 2, TaskKind.THREE_CLASS: 3}.get(self)


def task_kind(value) -> TaskKind:
    try:
        return TaskKind(value)
    except ValueError:
        names = ", ".join(t.value for t in TaskKind)
        raise InputError(f"unknown task kind {value!r}; expected one of {names}") from None


@dataclass(frozen=True, eq=False)
class TaskSplit:
    """Index sets and labels for one task.

    Node tasks hold 1-D node index arrays; link tasks hold ``(k, 2)`` arrays of
    ordered pairs.
    """

    task_kind: TaskKind
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    train_labels: np.ndarray
    val_labels: np.ndarray
    test_labels: np.ndarray
    num_classes: int
    propagation_graph: DirectedGraph | None = None

    def subset(self, name: str):
        if name not in SUBSETS:
            raise InputError(f"unknown subset {name!r}")
        return getattr(self, name), getattr(self, f"{name}_labels")

    def sizes(self) -> dict:
        return {s: len(getattr(self, s)) for s in SUBSETS}


def build_node_split(
    graph: DirectedGraph, labels, per_class_train: int, val_count: int, seed: int
) -> TaskSplit:
    """Stratified training nodes, uniform validation nodes, everything else test."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (graph.n,):
        raise InputError(f"expected {graph.n} labels, got shape {labels.shape}")
    if labels.size == 0 or labels.min() < 0:
        raise InputError("labels must be nonnegative class indices")
    num_classes = int(labels.max()) + 1
    if per_class_train < 1 or val_count < 1:
        raise InputError("per_class_train and val_count must be positive")
    if per_class_train * num_classes + val_count >= graph.n:
        raise InputError(
            f"{per_class_train}*{num_classes} train + {val_count} val leaves no test nodes "
            f"(n={graph.n})"
        )
    rng = np.random.default_rng(seed)
    train = []
    for c in range(num_classes):
        members = np.flatnonzero(labels == c)
        if members.size < per_class_train:
            raise InsufficientDataError(
                f"class {c} has {members.size} nodes, need {per_class_train} for training"
            )
        train.append(rng.choice(members, size=per_class_train, replace=False))
    train = np.sort(np.concatenate(train))
    rest = np.setdiff1d(np.arange(graph.n), train)
    rest = rng.permutation(rest)
    val, test = np.sort(rest[:val_count]), np.sort(rest[val_count:])
    return TaskSplit(
        TaskKind.NODE, train, val, test,
        labels[train], labels[val], labels[test],
        num_classes, graph,
    )


def _subset_sizes(m, train_frac, val_frac):
    if not (0 < train_frac < 1 and 0 < val_frac < 1 and train_frac + val_frac < 1):
        raise InputError("need 0 < train_frac, val_frac and train_frac + val_frac < 1")
    n_train = int(np.floor(train_frac * m + 0.5))
    n_val = int(np.floor(val_frac * m + 0.5))
    n_test = m - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise InsufficientDataError(f"{m} edges cannot fill all three subsets")
    return n_train, n_val, n_test


def _sample_pairs(graph, count, rng, accept):
    """Distinct ordered non-loop pairs satisfying ``accept(u, v)``, in draw order."""
    n = graph.n
    total = n * (n - 1)
    got_u, got_v = np.empty(0, np.int64), np.empty(0, np.int64)
    seen = np.empty(0, np.int64)
    attempts = 0
    while got_u.size < count:
        attempts += 1
        if attempts > 200:
            raise InsufficientDataError(f"could not sample {count} eligible node pairs")
        codes = rng.integers(0, total, size=max(2 * (count - got_u.size), 64))
        _, first = np.unique(codes, return_index=True)
        codes = codes[np.sort(first)]
        codes = codes[~np.isin(codes, seen)]
        u = codes // (n - 1)
        r = codes % (n - 1)
        v = r + (r >= u)
        ok = accept(u, v)
        seen = np.concatenate([seen, codes[ok]])
        got_u = np.concatenate([got_u, u[ok]])
        got_v = np.concatenate([got_v, v[ok]])
    return got_u[:count], got_v[:count]


def build_link_split(
    graph: DirectedGraph,
    kind,
    train_frac: float = 0.80,
    val_frac: float = 0.15,
    seed: int = 0,
) -> TaskSplit:
    """Partition edges by count and emit labelled ordered pairs per subset."""
    kind = task_kind(kind)
    if not kind.is_link:
        raise InputError("build_link_split needs a link task kind")
    if graph.m < 20:
        raise InsufficientDataError(f"link splits need at least 20 edges, graph has {graph.m}")
    sizes = _subset_sizes(graph.m, train_frac, val_frac)
    rng = np.random.default_rng(seed)

    src, dst = graph.edges()
    perm = rng.permutation(graph.m)
    bounds = np.cumsum((0,) + sizes)
    parts = [perm[bounds[i]:bounds[i + 1]] for i in range(3)]
    propagation = graph.with_edges(src[parts[0]], dst[parts[0]])

    if kind is TaskKind.EXISTENCE:
        total_non_edges = graph.n * (graph.n - 1) - graph.m
        if total_non_edges < graph.m:
            raise InsufficientDataError("not enough non-edges for balanced negatives")
        neg_u, neg_v = _sample_pairs(
            graph, graph.m, rng, lambda u, v: ~graph.has_edges(u, v)
        )
        neg_parts = [np.arange(bounds[i], bounds[i + 1]) for i in range(3)]
    else:
        one_way = ~graph.has_edges(dst, src)
        parts = [p[one_way[p]] for p in parts]
        if any(p.size == 0 for p in parts):
            raise InsufficientDataError("a subset has no one-way edges for the direction tasks")
        if kind is TaskKind.THREE_CLASS:
            counts = [p.size for p in parts]
            neg_u, neg_v = _sample_pairs(
                graph, sum(counts), rng,
                lambda u, v: ~graph.has_edges(u, v) & ~graph.has_edges(v, u),
            )
            offs = np.cumsum([0] + counts)
            neg_parts = [np.arange(offs[i], offs[i + 1]) for i in range(3)]

    out = {}
    for name, part, i in zip(SUBSETS, parts, range(3)):
        u, v = src[part], dst[part]
        if kind is TaskKind.EXISTENCE:
            nu, nv = neg_u[neg_parts[i]], neg_v[neg_parts[i]]
            pairs = np.concatenate([np.stack([u, v], 1), np.stack([nu, nv], 1)])
            labels = np.concatenate([np.ones(u.size, np.int64), np.zeros(nu.size, np.int64)])
        elif kind is TaskKind.DIRECTION:
            pairs = np.concatenate([np.stack([u, v], 1), np.stack([v, u], 1)])
            labels = np.repeat(np.array([0, 1], np.int64), u.size)
        else:
            nu, nv = neg_u[neg_parts[i]], neg_v[neg_parts[i]]
            pairs = np.concatenate(
                [np.stack([u, v], 1), np.stack([v, u], 1), np.stack([nu, nv], 1)]
            )
            labels = np.repeat(np.array([0, 1, 2], np.int64), u.size)
        order = rng.permutation(labels.size)
        out[name] = (np.ascontiguousarray(pairs[order]), labels[order])

    return TaskSplit(
        kind,
        out["train"][0], out["val"][0], out["test"][0],
        out["train"][1], out["val"][1], out["test"][1],
        kind.num_classes, propagation,
    )
