import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lightdic.errors import InputError, ValidationError
from lightdic.graph import DirectedGraph, generate_random_digraph
from lightdic.oracle import (
    DenseHermitian,
    denoise_objective,
    denoise_solve,
    dense_magnetic_laplacian,
    dense_magnetic_operator,
    dirichlet_energy,
    eigendecompose,
    prox_gradient_iterate,
    rayleigh_quotient,
)

from conftest import digraphs, qs


def _random_hermitian(rng, n):
    H = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return H + H.conj().T


def _check_eigensystem(M, eig, tol=1e-8):
    U = eig.vectors
    n = M.shape[0]
    assert np.all(np.diff(eig.eigenvalues) >= 0)
    assert np.abs(U.conj().T @ U - np.eye(n)).max() <= tol
    scale = max(np.linalg.norm(M), 1.0)
    assert np.linalg.norm(M @ U - U * eig.eigenvalues, axis=0).max() <= tol * scale


def test_diagonal_matrix():
    eig = eigendecompose(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(eig.eigenvalues, [1, 2, 3], atol=1e-14)
    assert np.allclose(eig.vectors, np.eye(3)[:, [1, 2, 0]], atol=1e-14)


def test_single_edge_laplacian(single_edge):
    eig = eigendecompose(dense_magnetic_laplacian(single_edge, 0.25))
    assert np.allclose(eig.eigenvalues, [0.0, 1.0], atol=1e-14)


def test_random_hermitian_reconstruction(rng):
    M = _random_hermitian(rng, 16)
    eig = eigendecompose(DenseHermitian.from_complex(M))
    U = eig.vectors
    assert np.linalg.norm(M - (U * eig.eigenvalues) @ U.conj().T) <= 1e-8 * np.linalg.norm(M)
    _check_eigensystem(M, eig)
    assert np.allclose(eig.eigenvalues, np.linalg.eigvalsh(M), atol=1e-10)


def test_degenerate_spectrum(rng):
    # eigenvalues {1, 1, 1, 4, 4}
    Q, _ = np.linalg.qr(rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))
    M = (Q * np.array([1, 1, 1, 4, 4.0])) @ Q.conj().T
    M = 0.5 * (M + M.conj().T)
    eig = eigendecompose(M)
    assert np.allclose(eig.eigenvalues, [1, 1, 1, 4, 4], atol=1e-10)
    _check_eigensystem(M, eig)


def test_phase_convention(rng):
    eig = eigendecompose(_random_hermitian(rng, 8))
    for u in eig.vectors.T:
        first = u[np.flatnonzero(np.abs(u) > 1e-8)[0]]
        assert first.real > 0 and abs(first.imag) <= 1e-12


def test_non_hermitian_rejected(rng):
    with pytest.raises(ValidationError):
        eigendecompose(rng.standard_normal((4, 4)))


def test_oracle_size_limit():
    with pytest.raises(InputError):
        eigendecompose(np.eye(513))


@settings(max_examples=30)
@given(digraphs(max_n=20), qs)
def test_eigensystem_invariants(g, q):
    for M in (dense_magnetic_laplacian(g, q), dense_magnetic_operator(g, q)):
        eig = eigendecompose(M)
        _check_eigensystem(M, eig)
        for k in range(g.n):
            assert abs(rayleigh_quotient(M, eig.vectors[:, k]) - eig.eigenvalues[k]) <= 1e-8


def test_dirichlet_constant_q0(small_graph):
    assert dirichlet_energy(small_graph, 0.0, np.full(20, 2.0 - 1.0j)) <= 1e-24


def test_dirichlet_phase_aligned_pair(single_edge):
    assert dirichlet_energy(single_edge, 0.25, np.array([1.0, -1.0j])) <= 1e-30


def test_dirichlet_dimension_mismatch(single_edge):
    with pytest.raises(InputError):
        dirichlet_energy(single_edge, 0.1, np.ones(3))


@settings(max_examples=100)
@given(digraphs(max_n=20), st.floats(0, 0.25), st.integers(0, 2**31))
def test_dirichlet_equals_quadratic_form(g, q, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n)
    quad = np.real(np.vdot(x, dense_magnetic_laplacian(g, q) @ x))
    assert abs(dirichlet_energy(g, q, x) - quad) <= 1e-9 * max(abs(quad), 1e-300)


def test_denoise_edgeless_is_identity(rng):
    y = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert np.allclose(denoise_solve(DirectedGraph.from_edges(4, [], []), 0.1, y), y, atol=1e-14)


def test_denoise_eigenvector(small_graph):
    eig = eigendecompose(dense_magnetic_laplacian(small_graph, 0.2))
    for k in (0, 7, 19):
        u = eig.vectors[:, k]
        x = denoise_solve(small_graph, 0.2, u, eig=eig)
        assert np.allclose(x, u / (eig.eigenvalues[k] + 1), atol=1e-12)


def test_denoise_local_optimality(rng):
    g = generate_random_digraph(20, 50, seed=8)
    q = 0.15
    L = dense_magnetic_laplacian(g, q)
    y = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    x = denoise_solve(g, q, y)
    assert np.linalg.norm((L + np.eye(20)) @ x - y) <= 1e-8 * np.linalg.norm(y)
    z = denoise_objective(g, q, x, y, laplacian=L)
    for _ in range(1000):
        d = 1e-3 * (rng.standard_normal(20) + 1j * rng.standard_normal(20))
        assert denoise_objective(g, q, x + d, y, laplacian=L) >= z


def test_prox_zero_steps(small_graph, rng):
    x0 = rng.standard_normal(20) + 0j
    assert np.array_equal(prox_gradient_iterate(small_graph, 0.1, np.zeros(20), x0, 0.5, 0), x0)


def test_prox_alpha1_y0_is_propagation(small_graph, rng):
    x = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    q = 0.25
    L = dense_magnetic_laplacian(small_graph, q)
    d = np.diag(L).real
    P = np.diag(d) - L  # A_m * exp(i Theta)
    expected = (P @ x) / (d + 1.0)
    assert np.allclose(prox_gradient_iterate(small_graph, q, np.zeros(20), x, 1.0, 1), expected, atol=1e-14)


def test_prox_converges_monotonically(rng):
    g = generate_random_digraph(20, 50, seed=6)
    q = 0.2
    L = dense_magnetic_laplacian(g, q)
    y = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    x, trace = prox_gradient_iterate(g, q, y, np.zeros(20, complex), 0.5, 200, return_trace=True)
    z = [denoise_objective(g, q, s, y, laplacian=L) for s in trace]
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(z, z[1:]))
    assert np.linalg.norm(x - denoise_solve(g, q, y)) <= 1e-4


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
def test_prox_alpha_range(small_graph, alpha):
    with pytest.raises(InputError):
        prox_gradient_iterate(small_graph, 0.1, np.zeros(20), np.zeros(20), alpha, 1)
