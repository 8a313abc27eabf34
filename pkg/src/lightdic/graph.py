"""Directed graph container, edge-list ingestion and random generation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import BoundsError, InputError, ParseError


def _frozen(a, dtype=np.int64):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _csr_from_pairs(n, rows, cols):
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return indptr, cols


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Binary digraph held as CSR (out-edges) plus CSR of the transpose (in-edges).

    Use :meth:`from_edges` rather than the raw constructor; it deduplicates,
    drops self-loops and sorts column indices.
    """

    n: int
    out_indptr: np.ndarray
    out_indices: np.ndarray
    in_indptr: np.ndarray
    in_indices: np.ndarray

    @classmethod
    def from_edges(cls, n: int, src, dst) -> "DirectedGraph":
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise InputError("src and dst must have the same length")
        if n < 0:
            raise InputError("node count must be nonnegative")
        if src.size:
            lo = min(src.min(), dst.min())
            hi = max(src.max(), dst.max())
            if lo < 0 or hi >= n:
                raise BoundsError(f"edge endpoint out of range [0, {n})")
        keep = src != dst
        src, dst = src[keep], dst[keep]
        codes = np.unique(src * max(n, 1) + dst)
        src, dst = codes // max(n, 1), codes % max(n, 1)
        out_ptr, out_idx = _csr_from_pairs(n, src, dst)
        in_ptr, in_idx = _csr_from_pairs(n, dst, src)
        return cls(
            int(n), _frozen(out_ptr), _frozen(out_idx), _frozen(in_ptr), _frozen(in_idx)
        )

    @property
    def m(self) -> int:
        return int(self.out_indices.size)

    @property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_indptr)

    @property
    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_indptr)

    def edges(self):
        """Return ``(src, dst)`` arrays in row-major sorted order."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.out_degree)
        return src, np.asarray(self.out_indices)

    def in_edges(self):
        """Edges recovered from the transpose CSR, as ``(src, dst)``."""
        dst = np.repeat(np.arange(self.n, dtype=np.int64), self.in_degree)
        return np.asarray(self.in_indices), dst

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.m, dtype=np.float64)
        return sp.csr_matrix(
            (data, self.out_indices.copy(), self.out_indptr.copy()), shape=(self.n, self.n)
        )

    def has_edges(self, src, dst) -> np.ndarray:
        """Vectorised membership test for ordered pairs."""
        q = np.asarray(src, dtype=np.int64) * max(self.n, 1) + np.asarray(dst, dtype=np.int64)
        codes = self._edge_codes
        if codes.size == 0:
            return np.zeros(q.shape, dtype=bool)
        pos = np.minimum(np.searchsorted(codes, q), codes.size - 1)
        return codes[pos] == q

    @cached_property
    def _edge_codes(self):
        src, dst = self.edges()
        return src * max(self.n, 1) + dst

    def with_edges(self, src, dst) -> "DirectedGraph":
        """New graph on the same node set with a different edge list."""
        return DirectedGraph.from_edges(self.n, src, dst)

    def fingerprint(self) -> int:
        """64-bit hash of the node count and the sorted edge list."""
        src, dst = self.edges()
        h = hashlib.blake2b(digest_size=8)
        h.update(np.uint64(self.n).tobytes())
        pairs = np.empty((self.m, 2), dtype="<u8")
        pairs[:, 0] = src
        pairs[:, 1] = dst
        h.update(pairs.tobytes())
        return int.from_bytes(h.digest(), "little")

    def __repr__(self):
        return f"DirectedGraph(n={self.n}, m={self.m})"


def load_edge_list(path, num_nodes: int | None = None) -> DirectedGraph:
    """Read a whitespace-separated ``u v`` edge list (0-indexed).

    Blank lines and ``#`` comments are skipped. Duplicate edges collapse and
    self-loops are dropped. Lines with a third column are rejected since only
    unweighted graphs are supported.
    """
    src, dst = [], []
    with open(Path(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                msg = "weighted edges are not supported" if len(parts) == 3 else (
                    f"expected 2 integers, got {len(parts)} fields")
                raise ParseError(msg, line=lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer node index in {s!r}", line=lineno) from None
            if u < 0 or v < 0:
                raise ParseError("negative node index", line=lineno)
            if num_nodes is not None and (u >= num_nodes or v >= num_nodes):
                raise BoundsError(f"line {lineno}: node index >= num_nodes={num_nodes}")
            src.append(u)
            dst.append(v)
    if num_nodes is None:
        num_nodes = max(max(src), max(dst)) + 1 if src else 0
    return DirectedGraph.from_edges(num_nodes, src, dst)


def save_edge_list(graph: DirectedGraph, path) -> None:
    src, dst = graph.edges()
    with open(Path(path), "w", encoding="utf-8") as fh:
        fh.write(f"# n={graph.n} m={graph.m}\n")
        for u, v in zip(src.tolist(), dst.tolist()):
            fh.write(f"{u} {v}\n")


def _decode_pairs(codes, n):
    # code c enumerates ordered non-loop pairs: u = c // (n-1), v skips u
    u = codes // (n - 1)
    r = codes % (n - 1)
    v = r + (r >= u)
    return u, v


def generate_random_digraph(n: int, m_target: int, seed: int) -> DirectedGraph:
    """Uniformly random digraph with exactly ``m_target`` distinct non-loop edges."""
    if n < 0:
        raise InputError("n must be nonnegative")
    total = n * (n - 1)
    if m_target < 0 or m_target > total:
        raise InputError(f"m_target={m_target} outside [0, {total}] for n={n}")
    if m_target == 0:
        return DirectedGraph.from_edges(n, [], [])
    rng = np.random.default_rng(seed)
    codes = rng.choice(total, size=m_target, replace=False, shuffle=False)
    u, v = _decode_pairs(np.asarray(codes, dtype=np.int64), n)
    return DirectedGraph.from_edges(n, u, v)
