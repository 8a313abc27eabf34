"""Feature matrix validation and eigenvector features for featureless graphs."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import InputError, ValidationError
from .graph import DirectedGraph


def as_feature_matrix(X, n: int | None = None) -> np.ndarray:
    """Coerce to a C-contiguous float64 ``n x f`` array and reject non-finite entries."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValidationError(f"features must be 2-D, got shape {X.shape}")
    if n is not None and X.shape[0] != n:
        raise ValidationError(f"features have {X.shape[0]} rows, graph has {n} nodes")
    if not np.isfinite(X).all():
        raise ValidationError("features contain NaN or inf")
    return X


def regularized_adjacency(graph: DirectedGraph) -> sp.csr_matrix:
    """``D^-1/2 (A_s + I) D^-1/2`` with ``A_s = max(A, A^T)``."""
    a = graph.adjacency()
    a_s = a.maximum(a.T) + sp.identity(graph.n, format="csr")
    d_is = 1.0 / np.sqrt(np.asarray(a_s.sum(axis=1)).ravel())
    D = sp.diags(d_is)
    return (D @ a_s @ D).tocsr()


def spectral_features(
    graph: DirectedGraph, k: int, iters: int = 200, seed: int = 0, oversample: int = 8
) -> np.ndarray:
    """Leading ``k`` eigenvectors of the regularized symmetric adjacency.

    Block power iteration on ``(S + I) / 2`` (same eigenvectors as ``S`` but
    with a nonnegative spectrum, so the leading block is the algebraically
    largest one), QR re-orthonormalization after every product, and a final
    Rayleigh-Ritz step on an oversampled block. Columns come out orthonormal
    and ordered by decreasing eigenvalue; each column's sign is fixed so its
    largest-magnitude entry is positive.
    """
    n = graph.n
    if n == 0:
        raise InputError("graph has no nodes")
    if k < 1 or k > n:
        raise InputError(f"k={k} must lie in [1, n={n}]")
    S = regularized_adjacency(graph)
    p = min(n, k + oversample)
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    for _ in range(iters):
        Q, _ = np.linalg.qr(0.5 * (S @ Q + Q))

    H = Q.T @ (S @ Q)
    vals, vecs = np.linalg.eigh(0.5 * (H + H.T))
    order = np.argsort(vals)[::-1][:k]
    V = Q @ vecs[:, order]
    V /= np.linalg.norm(V, axis=0)
    pivot = np.abs(V).argmax(axis=0)
    V *= np.sign(V[pivot, np.arange(k)])
    return np.ascontiguousarray(V)
