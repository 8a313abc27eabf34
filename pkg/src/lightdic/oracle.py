"""Dense brute-force references for small graphs.

Nothing here is meant to scale. The functions rebuild the magnetic matrices
densely, straight from the edge list, so they can check the sparse path
without sharing code with it.

Hermitian eigenproblems are solved through the real symmetric embedding::

    [[Re M, -Im M],
     [Im M,  Re M]]   (2n x 2n)

whose spectrum is the spectrum of ``M`` with every eigenvalue doubled. The
eigenvector ``a + ib`` of ``M`` shows up as ``[a; b]`` and ``i(a + ib)`` as
``[-b; a]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, ValidationError
from .graph import DirectedGraph

MAX_ORACLE_N = 512


@dataclass
class DenseHermitian:
    re: np.ndarray
    im: np.ndarray

    @property
    def n(self) -> int:
        return self.re.shape[0]

    @classmethod
    def from_complex(cls, M) -> "DenseHermitian":
        M = np.asarray(M, dtype=np.complex128)
        return cls(np.ascontiguousarray(M.real), np.ascontiguousarray(M.imag))

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im


@dataclass
class EigenSystem:
    eigenvalues: np.ndarray  # ascending
    vec_re: np.ndarray  # columns are eigenvectors
    vec_im: np.ndarray

    @property
    def vectors(self) -> np.ndarray:
        return self.vec_re + 1j * self.vec_im


def _as_hermitian(M) -> DenseHermitian:
    if isinstance(M, DenseHermitian):
        return M
    return DenseHermitian.from_complex(M)


def _fix_phase(v, tol):
    """Rotate so the first component with magnitude above ``tol`` is real positive."""
    k = np.flatnonzero(np.abs(v) > tol)[0]
    return v * (abs(v[k]) / v[k])


def eigendecompose(M, cluster_tol: float = 1e-10) -> EigenSystem:
    """Full eigendecomposition of a dense Hermitian matrix.

    Accepts a :class:`DenseHermitian` or a complex ndarray. Eigenvalues of the
    2n embedding are grouped into clusters (consecutive gaps below
    ``cluster_tol * max(1, ||M||)``); each cluster of size ``2r`` spans an
    ``r``-dimensional complex eigenspace, from which an orthonormal basis is
    extracted with an SVD. Each eigenvector's phase is then normalised so its
    first non-negligible component is real and positive.
    """
    H = _as_hermitian(M)
    n = H.n
    if H.re.shape != (n, n) or H.im.shape != (n, n):
        raise ValidationError("matrix must be square")
    if n > MAX_ORACLE_N:
        raise InputError(f"oracle limited to n <= {MAX_ORACLE_N}, got {n}")
    if not (np.isfinite(H.re).all() and np.isfinite(H.im).all()):
        raise ValidationError("matrix has non-finite entries")
    scale = max(1.0, float(np.abs(H.re).max(initial=0) + np.abs(H.im).max(initial=0)))
    asym = max(np.abs(H.re - H.re.T).max(initial=0), np.abs(H.im + H.im.T).max(initial=0))
    if asym > 1e-12 * scale:
        raise ValidationError(f"matrix is not Hermitian (asymmetry {asym:.3e})")
    if n == 0:
        return EigenSystem(np.zeros(0), np.zeros((0, 0)), np.zeros((0, 0)))

    E = np.block([[H.re, -H.im], [H.im, H.re]])
    vals, vecs = np.linalg.eigh(E)
    Z = vecs[:n] + 1j * vecs[n:]

    tol = cluster_tol * scale
    eigenvalues, columns = [], []
    start = 0
    while start < 2 * n:
        stop = start + 1
        while stop < 2 * n and ((stop - start) % 2 == 1 or vals[stop] - vals[stop - 1] <= tol):
            stop += 1
        r = (stop - start) // 2
        U, _, _ = np.linalg.svd(Z[:, start:stop], full_matrices=False)
        pair_means = 0.5 * (vals[start:stop:2] + vals[start + 1:stop:2])
        for j in range(r):
            columns.append(_fix_phase(U[:, j], 1e-8))
            eigenvalues.append(pair_means[j])
        start = stop

    V = np.column_stack(columns)
    return EigenSystem(np.asarray(eigenvalues), np.ascontiguousarray(V.real), np.ascontiguousarray(V.imag))


def rayleigh_quotient(M, x) -> float:
    M = _as_hermitian(M).to_complex()
    x = np.asarray(x, dtype=np.complex128)
    return float(np.real(np.vdot(x, M @ x)) / np.real(np.vdot(x, x)))


# dense rebuilds, straight from the edge list

def _dense_parts(graph: DirectedGraph, q: float):
    n = graph.n
    A = np.zeros((n, n))
    src, dst = graph.edges()
    A[src, dst] = 1.0
    A_m = 0.5 * (A + A.T)
    theta = 2.0 * math.pi * q * (A - A.T)
    return A_m, theta


def dense_magnetic_laplacian(graph: DirectedGraph, q: float) -> np.ndarray:
    A_m, theta = _dense_parts(graph, q)
    return np.diag(A_m.sum(axis=1)) - A_m * np.exp(1j * theta)


def dense_magnetic_operator(graph: DirectedGraph, q: float) -> np.ndarray:
    A_m, theta = _dense_parts(graph, q)
    A_t = A_m + np.eye(graph.n)
    d = A_t.sum(axis=1)
    return (A_t / np.sqrt(np.outer(d, d))) * np.exp(1j * theta)


def dirichlet_energy(graph: DirectedGraph, q: float, x) -> float:
    """Edge-sum form: sum over unordered adjacent pairs of ``A_m |x_u - e^{i theta_uv} x_v|^2``."""
    x = np.asarray(x, dtype=np.complex128).ravel()
    if x.size != graph.n:
        raise InputError(f"signal has {x.size} entries, graph has {graph.n} nodes")
    src, dst = graph.edges()
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0) if src.size else np.zeros((0, 2), int)
    u, v = pairs[:, 0], pairs[:, 1]
    fwd = graph.has_edges(u, v).astype(np.float64)
    bwd = graph.has_edges(v, u).astype(np.float64)
    weight = 0.5 * (fwd + bwd)
    theta = 2.0 * math.pi * q * (fwd - bwd)
    diff = x[u] - np.exp(1j * theta) * x[v]
    return float(np.sum(weight * np.abs(diff) ** 2))


def denoise_objective(graph: DirectedGraph, q: float, x, y, laplacian=None) -> float:
    """``||x - y||^2 + x^H L x``; the squared norm is what makes ``(L + I)^-1 y`` the minimiser."""
    L = dense_magnetic_laplacian(graph, q) if laplacian is None else laplacian
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    r = x - y
    return float(np.real(np.vdot(r, r)) + np.real(np.vdot(x, L @ x)))


def denoise_solve(graph: DirectedGraph, q: float, y, eig: EigenSystem | None = None) -> np.ndarray:
    """``(L + I)^-1 y`` through the eigendecomposition of ``L``."""
    y = np.asarray(y, dtype=np.complex128).ravel()
    if y.size != graph.n:
        raise InputError(f"signal has {y.size} entries, graph has {graph.n} nodes")
    if eig is None:
        eig = eigendecompose(dense_magnetic_laplacian(graph, q))
    U = eig.vectors
    return U @ ((U.conj().T @ y) / (eig.eigenvalues + 1.0))


def prox_gradient_iterate(
    graph: DirectedGraph, q: float, y, x0, alpha: float, steps: int, return_trace: bool = False
):
    """Preconditioned gradient steps on the denoising objective.

    Update: ``x <- (1 - alpha) x + alpha D~^-1 [(A_m * e^{i Theta}) x + y]`` with
    ``D~ = D_m + I``. This equals ``x - alpha D~^-1 [(L + I) x - y]``; the phase
    stays on ``A_m`` so the step follows the true gradient.
    """
    if not (0.0 < alpha <= 1.0):
        raise InputError(f"alpha={alpha} must lie in (0, 1]")
    A_m, theta = _dense_parts(graph, q)
    P = A_m * np.exp(1j * theta)
    d_inv = 1.0 / (A_m.sum(axis=1) + 1.0)
    y = np.asarray(y, dtype=np.complex128).ravel()
    x = np.asarray(x0, dtype=np.complex128).ravel().copy()
    trace = [x.copy()] if return_trace else None
    for _ in range(steps):
        x = (1.0 - alpha) * x + alpha * d_inv * (P @ x + y)
        if return_trace:
            trace.append(x.copy())
    return (x, trace) if return_trace else x
