"""Magnetic Laplacian and the normalized magnetic graph operator.

Both are complex Hermitian and are stored as two real value planes (``re``,
``im``) over one shared CSR pattern. Applying them to a complex feature
matrix then costs four real sparse-dense products.

Entry-wise, for a binary digraph ``A``::

    A_m(u, v)   = (A(u, v) + A(v, u)) / 2
    Theta(u, v) = 2*pi*q * (A(u, v) - A(v, u))
    L           = D_m - A_m * exp(i Theta)
    MGO         = D~^-1/2 (A_m + I) D~^-1/2 * exp(i Theta)

with ``D~ = D_m + I``. Every off-diagonal pair (u, v), (v, u) is computed
from the same cosine/sine and the same product of inverse square roots, so
Hermitian symmetry holds bit-exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InputError
from .graph import DirectedGraph

Q_MAX = 0.25

# pattern codes: bit 0 -> A(u,v), bit 1 -> A(v,u), bit 2 -> diagonal
_FWD, _BWD, _DIAG = 1, 2, 4


def check_q(q: float) -> float:
    q = float(q)
    if not (0.0 <= q <= Q_MAX) or math.isnan(q):
        raise InputError(f"q={q} outside [0, {Q_MAX}]")
    return q


@dataclass(frozen=True)
class MagneticConfig:
    q: float = 0.25
    add_self_loops: bool = True

    def __post_init__(self):
        check_q(self.q)


@dataclass(frozen=True, eq=False)
class ComplexSparseMatrix:
    """Square complex matrix: one CSR pattern, separate real and imaginary planes."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    re: np.ndarray
    im: np.ndarray
    _planes: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def real_csr(self) -> sp.csr_matrix:
        return self._plane("re")

    def imag_csr(self) -> sp.csr_matrix:
        return self._plane("im")

    def _plane(self, which):
        if which not in self._planes:
            vals = self.re if which == "re" else self.im
            self._planes[which] = sp.csr_matrix(
                (vals, self.indices, self.indptr), shape=(self.n, self.n)
            )
        return self._planes[which]

    def row_blocks(self, parts: int):
        """Split into ``parts`` contiguous row ranges; returns ``[(lo, hi, re, im)]``."""
        key = ("blocks", parts)
        if key not in self._planes:
            bounds = np.linspace(0, self.n, parts + 1).astype(np.int64)
            re, im = self.real_csr(), self.imag_csr()
            self._planes[key] = [
                (lo, hi, re[lo:hi], im[lo:hi])
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo
            ]
        return self._planes[key]

    def to_dense(self) -> np.ndarray:
        """Dense ``complex128`` copy. Intended for small-scale checks."""
        out = np.zeros((self.n, self.n), dtype=np.complex128)
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        out[rows, self.indices] = self.re + 1j * self.im
        return out

    def diagonal(self) -> np.ndarray:
        return self.real_csr().diagonal()

    def is_hermitian(self) -> bool:
        """Exact check: re symmetric, im antisymmetric, stored pattern symmetric."""
        re, im = self.real_csr(), self.imag_csr()
        pattern = sp.csr_matrix(
            (np.ones(self.nnz), self.indices, self.indptr), shape=(self.n, self.n)
        )
        if (pattern != pattern.T).nnz:
            return False
        return (re != re.T).nnz == 0 and (im != -im.T).nnz == 0


def _pair_codes(graph: DirectedGraph, with_diagonal: bool) -> sp.csr_matrix:
    a = graph.adjacency().astype(np.int64)
    codes = _FWD * a + _BWD * a.T.tocsr()
    if with_diagonal:
        codes = codes + _DIAG * sp.identity(graph.n, dtype=np.int64, format="csr")
    codes = codes.tocsr()
    codes.sort_indices()
    return codes


def _fwd_bwd(codes):
    fwd = (codes & _FWD).astype(bool)
    bwd = (codes & _BWD).astype(bool)
    return fwd, bwd


def _phase_parts(q, fwd, bwd):
    """cos and sin of Theta on the pattern; sine sign carries the orientation."""
    angle = 2.0 * math.pi * q
    c, s = math.cos(angle), math.sin(angle)
    if abs(c) < 1e-15:  # q = 1/4 gives cos = 6e-17 in floating point
        c = 0.0
    one_way = fwd ^ bwd
    cos = np.where(one_way, c, 1.0)
    sign = fwd.astype(np.float64) - bwd.astype(np.float64)
    return cos, sign * s


def _build(n, codes, re, im):
    return ComplexSparseMatrix(
        n,
        np.ascontiguousarray(codes.indptr, dtype=np.int64),
        np.ascontiguousarray(codes.indices, dtype=np.int64),
        np.ascontiguousarray(re, dtype=np.float64),
        np.ascontiguousarray(im, dtype=np.float64),
    )


def symmetrized_adjacency(graph: DirectedGraph) -> ComplexSparseMatrix:
    """``A_m``: 0.5 on one-way edges, 1.0 on reciprocal pairs; imaginary plane zero."""
    codes = _pair_codes(graph, with_diagonal=False)
    fwd, bwd = _fwd_bwd(codes.data)
    a_m = 0.5 * (fwd.astype(np.float64) + bwd.astype(np.float64))
    return _build(graph.n, codes, a_m, np.zeros_like(a_m))


def phase_matrix(graph: DirectedGraph, q: float) -> sp.csr_matrix:
    """Antisymmetric ``Theta`` on the symmetrized pattern (zeros kept for reciprocal pairs)."""
    q = check_q(q)
    codes = _pair_codes(graph, with_diagonal=False)
    fwd, bwd = _fwd_bwd(codes.data)
    theta = 2.0 * math.pi * q * (fwd.astype(np.float64) - bwd.astype(np.float64))
    return sp.csr_matrix((theta, codes.indices, codes.indptr), shape=(graph.n, graph.n))


def magnetic_laplacian(graph: DirectedGraph, q: float) -> ComplexSparseMatrix:
    """``L = D_m - A_m * exp(i Theta)``, with the diagonal stored for every node."""
    q = check_q(q)
    codes = _pair_codes(graph, with_diagonal=True)
    data = codes.data
    diag = (data & _DIAG).astype(bool)
    fwd, bwd = _fwd_bwd(data)
    a_m = 0.5 * (fwd.astype(np.float64) + bwd.astype(np.float64))
    cos, sin = _phase_parts(q, fwd, bwd)
    re = -a_m * cos
    im = -a_m * sin

    rows = np.repeat(np.arange(graph.n), np.diff(codes.indptr))
    deg = np.bincount(rows, weights=a_m, minlength=graph.n)
    re[diag] = deg[rows[diag]]
    im[diag] = 0.0
    return _build(graph.n, codes, re, im)


def magnetic_graph_operator(graph: DirectedGraph, q: float) -> ComplexSparseMatrix:
    """Self-looped, symmetrically normalized magnetic adjacency (the propagation operator)."""
    q = check_q(q)
    codes = _pair_codes(graph, with_diagonal=True)
    data = codes.data
    diag = (data & _DIAG).astype(bool)
    fwd, bwd = _fwd_bwd(data)
    a_t = 0.5 * (fwd.astype(np.float64) + bwd.astype(np.float64)) + diag

    rows = np.repeat(np.arange(graph.n), np.diff(codes.indptr))
    cols = codes.indices
    deg = np.bincount(rows, weights=a_t, minlength=graph.n)  # >= 1 from the self-loop
    d_is = 1.0 / np.sqrt(deg)
    mag = a_t * (d_is[rows] * d_is[cols])

    cos, sin = _phase_parts(q, fwd, bwd)
    return _build(graph.n, codes, mag * cos, mag * sin)


def _check_operands(M, Xr, Xi):
    Xr = np.asarray(Xr, dtype=np.float64)
    Xi = np.asarray(Xi, dtype=np.float64)
    if Xr.shape != Xi.shape:
        raise InputError(f"real/imag plane shapes differ: {Xr.shape} vs {Xi.shape}")
    if Xr.shape[0] != M.n:
        raise InputError(f"operator is {M.n}x{M.n} but features have {Xr.shape[0]} rows")
    return Xr, Xi


def complex_spmm(M: ComplexSparseMatrix, Xr, Xi, threads: int = 1):
    """``M @ (Xr + i Xi)`` returned as the pair ``(real, imag)``.

    With ``threads > 1`` output rows are split into contiguous blocks; every
    row is computed by the same kernel in the same order, so the result does
    not depend on the thread count.
    """
    Xr, Xi = _check_operands(M, Xr, Xi)
    if threads <= 1 or M.n < 2 * threads:
        re, im = M.real_csr(), M.imag_csr()
        return re @ Xr - im @ Xi, re @ Xi + im @ Xr

    out_r = np.empty(Xr.shape, dtype=np.float64)
    out_i = np.empty(Xr.shape, dtype=np.float64)

    def work(block):
        lo, hi, re, im = block
        out_r[lo:hi] = re @ Xr - im @ Xi
        out_i[lo:hi] = re @ Xi + im @ Xr

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, M.row_blocks(threads)))
    return out_r, out_i
