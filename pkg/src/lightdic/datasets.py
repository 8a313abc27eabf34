"""Dataset loaders and synthetic generators."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import DirectedGraph

CORAML_ENV = "LIGHTDIC_CORAML"


def load_npz_graph(path):
    """Load a citation graph stored in the ``cora_ml.npz`` layout.

    The archive holds the adjacency as CSR arrays (``adj_data``,
    ``adj_indices``, ``adj_indptr``, ``adj_shape``), the attributes as CSR
    (``attr_*``) and ``labels``. Returns ``(graph, features, labels)``.
    """
    with np.load(Path(path), allow_pickle=True) as data:
        adj = sp.csr_matrix(
            (data["adj_data"], data["adj_indices"], data["adj_indptr"]),
            shape=tuple(data["adj_shape"]),
        )
        if "attr_data" in data:
            X = sp.csr_matrix(
                (data["attr_data"], data["attr_indices"], data["attr_indptr"]),
                shape=tuple(data["attr_shape"]),
            ).toarray()
        else:
            X = None
        labels = np.asarray(data["labels"], dtype=np.int64)
    rows, cols = adj.nonzero()
    graph = DirectedGraph.from_edges(adj.shape[0], rows, cols)
    X = np.asarray(X, dtype=np.float64) if X is not None else None
    return graph, X, labels


def find_coraml(root=None):
    """Path to a local ``cora_ml.npz`` if one can be found, else None."""
    candidates = []
    if os.environ.get(CORAML_ENV):
        candidates.append(Path(os.environ[CORAML_ENV]))
    root = Path(root) if root else Path.cwd()
    candidates += [root / "data" / "cora_ml.npz", root / "cora_ml.npz"]
    for c in candidates:
        if c.is_file():
            return c
    return None


def gaussian_blobs(n: int = 100, dim: int = 2, separation: float = 6.0, seed: int = 0):
    """Two isotropic Gaussian clusters ``separation`` apart; returns ``(X, y)``."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    centers = np.zeros((2, dim))
    centers[1, 0] = separation
    X = centers[y] + rng.standard_normal((n, dim))
    return X, y


def block_digraph(
    n: int, num_classes: int = 2, p_in: float = 0.05, p_cross: float = 0.01,
    f: int = 16, signal: float = 0.5, seed: int = 0,
):
    """Directed stochastic block model with weakly informative features.

    Intra-block ties are reciprocal (both orientations) with probability
    ``p_in``; cross-block edges are one-way, from block ``c`` to block
    ``c + 1`` (mod the number of classes), with probability ``p_cross``.
    Features are standard normal noise plus ``signal`` times a class-specific
    mean direction. Returns ``(graph, X, labels)``.
    """
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % num_classes)
    same = labels[:, None] == labels[None, :]
    forward = (labels[None, :] - labels[:, None]) % num_classes == 1
    draw = rng.random((n, n))
    tie = np.triu(same & (draw < p_in), 1)
    A = tie | tie.T | (forward & (draw < p_cross))
    np.fill_diagonal(A, False)
    src, dst = np.nonzero(A)
    graph = DirectedGraph.from_edges(n, src, dst)
    means = rng.standard_normal((num_classes, f))
    X = rng.standard_normal((n, f)) + signal * means[labels]
    return graph, X, labels


def tiered_digraph(n: int, tiers: int = 4, p: float = 0.03, f: int = 8, signal: float = 0.3, seed: int = 0):
    """Layered digraph whose edges all point from tier ``t`` to tier ``t + 1``.

    Orientation is a node-level property here, so link direction is learnable
    by a linear model on pair embeddings. Feature column 0 carries a weak
    ramp in the tier index. Returns ``(graph, X, tier)``.
    """
    rng = np.random.default_rng(seed)
    tier = rng.integers(0, tiers, n)
    A = (tier[None, :] == tier[:, None] + 1) & (rng.random((n, n)) < p)
    src, dst = np.nonzero(A)
    X = rng.standard_normal((n, f))
    X[:, 0] += signal * tier
    return DirectedGraph.from_edges(n, src, dst), X, tier
