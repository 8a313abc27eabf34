"""Randomized property checks of the sparse pipeline against the dense oracle.

Each check draws its own random graphs from a generator seeded by
``(seed, check index)`` and reports the worst observed error next to its
tolerance. ``run_verify`` collects every check into one JSON-ready dict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import DirectedGraph, generate_random_digraph
from .magnetic import (
    ComplexSparseMatrix,
    complex_spmm,
    magnetic_graph_operator,
    magnetic_laplacian,
    phase_matrix,
    symmetrized_adjacency,
)
from .oracle import (
    dense_magnetic_laplacian,
    dense_magnetic_operator,
    denoise_objective,
    denoise_solve,
    dirichlet_energy,
    eigendecompose,
    prox_gradient_iterate,
)
from .propagation import PropagationConfig, propagate

Q_GRID = (0.0, 0.05, 0.1, 0.25)


def random_graph(rng, max_n: int, min_n: int = 2) -> DirectedGraph:
    n = int(rng.integers(max(min_n, max_n // 2), max_n + 1))
    m = int(rng.integers(n // 2, min(n * (n - 1), 4 * n) + 1))
    return generate_random_digraph(n, m, int(rng.integers(2**31)))


def _complex_signal(rng, n, cols=None):
    shape = (n,) if cols is None else (n, cols)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@dataclass
class _Tally:
    tol: float
    worst: float = 0.0
    cases: int = 0
    failures: int = 0
    skipped: int = 0
    gated: int = 0

    def record(self, err, ok=None):
        err = float(err)
        self.cases += 1
        self.worst = max(self.worst, err) if not math.isnan(err) else math.inf
        if ok is None:
            ok = err <= self.tol
        if not ok:
            self.failures += 1

    def result(self):
        return {
            "passed": self.failures == 0,
            "cases": self.cases,
            "failures": self.failures,
            "skipped": self.skipped,
        "gated": self.gated,
            "worst_error": self.worst,
            "tolerance": self.tol,
        }


# magnetic

def check_hermitian_psd(rng, scale, trials):
    """Laplacian exactly Hermitian and spectrum >= -1e-9 for every q in the grid."""
    t = _Tally(1e-9)
    for _ in range(trials):
        g = random_graph(rng, scale)
        for q in Q_GRID:
            L = magnetic_laplacian(g, q)
            if not L.is_hermitian():
                t.record(math.inf, ok=False)
                continue
            lam_min = eigendecompose(L.to_dense()).eigenvalues[0]
            t.record(max(-lam_min, 0.0))
    return t.result()


def check_operator_spectrum(rng, scale, trials):
    t = _Tally(1e-9)
    for _ in range(trials):
        g = random_graph(rng, scale)
        M = magnetic_graph_operator(g, float(rng.uniform(0, 0.25)))
        if not M.is_hermitian():
            t.record(math.inf, ok=False)
            continue
        lam = eigendecompose(M.to_dense()).eigenvalues
        t.record(max(lam[-1] - 1.0, -1.0 - lam[0], 0.0))
    return t.result()


def check_cos_nonnegative(rng, scale, trials):
    """Real parts of the operator's entries (magnitude times cos Theta) never go negative."""
    t = _Tally(0.0)
    for _ in range(trials):
        g = random_graph(rng, scale)
        q = float(rng.uniform(0, 0.25))
        theta = phase_matrix(g, q)
        M = magnetic_graph_operator(g, q)
        worst = max(-np.cos(theta.data).min(initial=1.0), -M.re.min(initial=0.0), 0.0)
        t.record(worst)
    return t.result()


def check_q0_reduction(rng, scale, trials):
    """At q = 0 the operator is the real renormalized symmetrized adjacency."""
    t = _Tally(1e-15)
    for _ in range(trials):
        g = random_graph(rng, scale)
        M = magnetic_graph_operator(g, 0.0)
        A = symmetrized_adjacency(g).to_dense().real + np.eye(g.n)
        d = A.sum(axis=1)
        ref = A / np.sqrt(np.outer(d, d))
        err = np.abs(M.to_dense().real - ref).max()
        t.record(err, ok=err <= t.tol and not np.any(M.im))
    return t.result()


def _random_hermitian_sparse(rng, n, density=0.3):
    mask = np.triu(rng.random((n, n)) < density, 1)
    H = np.where(mask, _complex_signal(rng, n, n), 0)
    H = H + H.conj().T + np.diag(rng.standard_normal(n))
    rows, cols = np.nonzero(np.ones((n, n), bool) & ((H != 0) | np.eye(n, dtype=bool)))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    vals = H[rows, cols]
    return ComplexSparseMatrix(n, indptr, cols.astype(np.int64), vals.real.copy(), vals.imag.copy()), H


def check_spmm_dense(rng, scale, trials):
    t = _Tally(1e-12)
    n_max = max(2, min(64, 2 * scale))
    for _ in range(trials):
        n = int(rng.integers(2, n_max + 1))
        M, H = _random_hermitian_sparse(rng, n)
        X = _complex_signal(rng, n, int(rng.integers(1, 6)))
        re, im = complex_spmm(M, X.real, X.imag)
        ref = H @ X
        t.record(np.linalg.norm(re + 1j * im - ref) / max(np.linalg.norm(ref), 1e-300))
    return t.result()


# propagation

def check_propagation_oracle(rng, scale, trials):
    t = _Tally(1e-10)
    for _ in range(trials):
        g = random_graph(rng, scale)
        X = rng.standard_normal((g.n, 3))
        for q in (0.0, 0.1, 0.25):
            steps = propagate(g, X, PropagationConfig(q=q, K=10)).steps
            M = dense_magnetic_operator(g, q)
            ref = X + 1j * X
            for k in range(1, 11):
                ref = M @ ref
                if k in (1, 2, 5, 10):
                    got = steps[k][0] + 1j * steps[k][1]
                    t.record(np.linalg.norm(got - ref) / max(np.linalg.norm(ref), 1e-300))
    return t.result()


def check_low_pass(rng, scale, trials):
    """After K steps, spectral coefficient k is scaled by (1 - lambda_k)^K, lambda from I - MGO."""
    t = _Tally(1e-8)
    for _ in range(trials):
        g = random_graph(rng, scale)
        q = float(rng.choice(Q_GRID))
        Mdense = dense_magnetic_operator(g, q)
        eig = eigendecompose(np.eye(g.n) - Mdense)
        U = eig.vectors
        X = rng.standard_normal((g.n, 1))
        X /= np.linalg.norm(X)
        coef0 = U.conj().T @ (X[:, 0] * (1 + 1j))
        steps = propagate(g, X, PropagationConfig(q=q, K=10)).steps
        for K in (1, 2, 5, 10):
            got = U.conj().T @ (steps[K][0][:, 0] + 1j * steps[K][1][:, 0])
            t.record(np.abs(got - (1.0 - eig.eigenvalues) ** K * coef0).max())
    return t.result()


def check_rayleigh_descent(rng, scale, trials, K=64):
    """Smoothness of MGO^K x approaches lambda_min of I - MGO when |1 - lambda_min| dominates.

    Strict dominance alone does not force convergence within K steps: the
    residual is bounded by ``spread * rho^(2K) * ||c||^2 / |c_1|^2`` with
    ``rho`` the ratio of the runner-up response to the leading one. Cases
    where that bound exceeds the tolerance are still checked against the exact
    spectral prediction of the quotient but not against ``lambda_min``.
    """
    t = _Tally(1e-4)
    for _ in range(trials):
        g = random_graph(rng, scale)
        q = float(rng.choice(Q_GRID))
        Lt = np.eye(g.n) - dense_magnetic_operator(g, q)
        eig = eigendecompose(Lt)
        lam = eig.eigenvalues
        resp = np.abs(1.0 - lam)
        if not resp[0] > resp[1:].max(initial=-1.0) + 1e-9:
            t.skipped += 1
            continue
        X = rng.standard_normal((g.n, 1))
        c = eig.vectors.conj().T @ (X[:, 0] * (1 + 1j))
        if abs(c[0]) < 1e-6:
            t.skipped += 1
            continue
        steps = propagate(g, X, PropagationConfig(q=q, K=K)).steps
        x = steps[K][0][:, 0] + 1j * steps[K][1][:, 0]
        rq = np.real(np.vdot(x, Lt @ x)) / np.real(np.vdot(x, x))
        w = np.abs(c) ** 2 * resp ** (2 * K)
        predicted = float(np.sum(w * lam) / np.sum(w))
        exact_err = abs(rq - predicted)
        rho = resp[1:].max(initial=0.0) / resp[0]
        bound = (lam[-1] - lam[0]) * rho ** (2 * K) * np.sum(np.abs(c) ** 2) / abs(c[0]) ** 2
        if bound <= t.tol:
            err = abs(rq - lam[0])
            t.record(err, ok=err <= t.tol and exact_err <= 1e-8)
        else:
            t.gated += 1
            t.record(0.0, ok=exact_err <= 1e-8)
    return t.result()


def check_linearity(rng, scale, trials):
    t = _Tally(1e-10)
    for _ in range(trials):
        g = random_graph(rng, scale)
        cfg = PropagationConfig(q=float(rng.choice(Q_GRID)), K=int(rng.integers(1, 8)))
        X = rng.standard_normal((g.n, 2))
        Y = rng.standard_normal((g.n, 2))
        a, b = rng.standard_normal(2)
        lhs = propagate(g, a * X + b * Y, cfg).steps[-1]
        px, py = propagate(g, X, cfg).steps[-1], propagate(g, Y, cfg).steps[-1]
        for p in (0, 1):
            ref = a * px[p] + b * py[p]
            t.record(np.linalg.norm(lhs[p] - ref) / max(np.linalg.norm(ref), 1e-300))
    return t.result()


def check_determinism(rng, scale, trials):
    """Bit-identical outputs across repeated runs and thread counts."""
    t = _Tally(0.0)
    for _ in range(trials):
        g = random_graph(rng, scale, min_n=8)
        cfg = PropagationConfig(q=float(rng.choice(Q_GRID)), K=3)
        X = rng.standard_normal((g.n, 4))
        base = propagate(g, X, cfg).steps
        for threads in (1, 3):
            other = propagate(g, X, cfg, threads=threads).steps
            same = all(
                np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
                for a, b in zip(base, other)
            )
            t.record(0.0 if same else 1.0)
    return t.result()


# spectral oracle

def check_dirichlet(rng, scale, trials):
    """Edge-sum energy equals the quadratic form x^H L x."""
    t = _Tally(1e-9)
    for _ in range(trials):
        g = random_graph(rng, scale)
        q = float(rng.uniform(0, 0.25))
        x = _complex_signal(rng, g.n)
        quad = np.real(np.vdot(x, dense_magnetic_laplacian(g, q) @ x))
        edge = dirichlet_energy(g, q, x)
        t.record(abs(edge - quad) / max(abs(quad), 1e-300))
    return t.result()


def check_courant_fischer(rng, scale, trials, samples=1000):
    """Rayleigh quotient of u_k equals lambda_k; lambda_1 lower-bounds random quotients."""
    t = _Tally(1e-8)
    for _ in range(trials):
        g = random_graph(rng, scale)
        L = dense_magnetic_laplacian(g, float(rng.uniform(0, 0.25)))
        eig = eigendecompose(L)
        U = eig.vectors
        rq = np.real(np.einsum("ij,ij->j", U.conj(), L @ U)) / np.real(
            np.einsum("ij,ij->j", U.conj(), U))
        err = np.abs(rq - eig.eigenvalues).max()
        V = _complex_signal(rng, g.n, samples)
        V /= np.linalg.norm(V, axis=0)
        quotients = np.real(np.einsum("ij,ij->j", V.conj(), L @ V))
        below = max(eig.eigenvalues[0] - quotients.min(), 0.0)
        t.record(max(err, below), ok=err <= t.tol and below <= 1e-12 * max(1.0, abs(quotients.min())))
    return t.result()


def check_prox_gradient(rng, scale, trials, alpha=0.5, steps=500):
    """Preconditioned iteration: objective never increases, ends within 1e-4 of (L + I)^-1 y."""
    t = _Tally(1e-4)
    for _ in range(trials):
        g = random_graph(rng, min(scale, 30))
        q = float(rng.uniform(0, 0.25))
        y = _complex_signal(rng, g.n)
        L = dense_magnetic_laplacian(g, q)
        x_star = denoise_solve(g, q, y)
        x, trace = prox_gradient_iterate(g, q, y, y, alpha, steps, return_trace=True)
        z = np.array([denoise_objective(g, q, s, y, laplacian=L) for s in trace])
        monotone = bool(np.all(np.diff(z) <= 1e-12 * np.abs(z[:-1])))
        dist = np.linalg.norm(x - x_star)
        t.record(dist, ok=monotone and dist <= t.tol)
    return t.result()


def check_eigen_consistency(rng, scale, trials):
    t = _Tally(1e-8)
    for _ in range(trials):
        g = random_graph(rng, scale)
        q = float(rng.uniform(0, 0.25))
        for M in (
            dense_magnetic_laplacian(g, q),
            dense_magnetic_operator(g, q),
            _random_hermitian_sparse(rng, g.n, 0.5)[1],
        ):
            eig = eigendecompose(M)
            U = eig.vectors
            recon = np.linalg.norm(M - (U * eig.eigenvalues) @ U.conj().T) / max(np.linalg.norm(M), 1e-300)
            ortho = np.abs(U.conj().T @ U - np.eye(g.n)).max()
            t.record(max(recon, ortho))
    return t.result()


CHECKS = [
    ("magnetic", "hermitian_psd", check_hermitian_psd),
    ("magnetic", "operator_spectrum_in_unit_interval", check_operator_spectrum),
    ("magnetic", "cos_theta_nonnegative", check_cos_nonnegative),
    ("magnetic", "q0_reduction", check_q0_reduction),
    ("magnetic", "spmm_matches_dense", check_spmm_dense),
    ("propagation", "dense_oracle_equivalence", check_propagation_oracle),
    ("propagation", "low_pass_attenuation", check_low_pass),
    ("propagation", "rayleigh_descent", check_rayleigh_descent),
    ("propagation", "linearity", check_linearity),
    ("propagation", "determinism", check_determinism),
    ("spectral-oracle", "dirichlet_energy_identity", check_dirichlet),
    ("spectral-oracle", "courant_fischer", check_courant_fischer),
    ("spectral-oracle", "prox_gradient_fixed_point", check_prox_gradient),
    ("spectral-oracle", "eigendecomposition_self_consistency", check_eigen_consistency),
]


def run_check(name: str, scale: int = 30, trials: int = 100, seed: int = 0) -> dict:
    for i, (module, check_name, fn) in enumerate(CHECKS):
        if check_name == name:
            rng = np.random.default_rng([seed, i])
            return {"module": module, "name": name, **fn(rng, scale, trials)}
    raise KeyError(name)


def run_verify(scale: int = 30, trials: int = 100, seed: int = 0) -> dict:
    """Run every check; the returned dict is deterministic for fixed arguments."""
    results = [run_check(name, scale, trials, seed) for _, name, _ in CHECKS]
    return {
        "scale": scale,
        "trials": trials,
        "seed": seed,
        "passed": all(r["passed"] for r in results),
        "vacuous": trials == 0,
        "checks": results,
    }
