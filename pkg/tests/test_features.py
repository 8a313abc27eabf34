import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lightdic.errors import InputError, ValidationError
from lightdic.features import as_feature_matrix, regularized_adjacency, spectral_features
from lightdic.graph import DirectedGraph, generate_random_digraph
from lightdic.oracle import eigendecompose


def _dense_S(g):
    A = np.zeros((g.n, g.n))
    src, dst = g.edges()
    A[src, dst] = 1.0
    A_s = np.maximum(A, A.T) + np.eye(g.n)
    d = A_s.sum(axis=1)
    return A_s / np.sqrt(np.outer(d, d))


def _path_plus_random(n, seed):
    # a directed path keeps the graph connected
    g = generate_random_digraph(n, 2 * n, seed)
    src, dst = g.edges()
    return g.with_edges(np.r_[src, np.arange(n - 1)], np.r_[dst, np.arange(1, n)])


def test_regularized_adjacency_matches_dense(small_graph):
    assert np.allclose(regularized_adjacency(small_graph).toarray(), _dense_S(small_graph), atol=1e-15)


def test_k1_perron_vector():
    g = _path_plus_random(40, seed=2)
    S = _dense_S(g)
    top = eigendecompose(S).eigenvalues[-1]
    v = spectral_features(g, 1)[:, 0]
    assert abs(v @ S @ v - top) <= 1e-6
    assert np.all(v > 0)  # Perron vector of a connected nonnegative matrix, sign fixed


def test_edgeless_columns_orthonormal():
    V = spectral_features(DirectedGraph.from_edges(5, [], []), 2)
    assert np.abs(V.T @ V - np.eye(2)).max() <= 1e-10


def test_full_basis_reconstruction():
    g = DirectedGraph.from_edges(6, [0, 1, 2, 3, 4, 5, 0], [1, 2, 3, 4, 5, 0, 3])
    S = _dense_S(g)
    lam = eigendecompose(S).eigenvalues[::-1]
    V = spectral_features(g, 6)
    assert np.linalg.norm(S - (V * lam) @ V.T) <= 1e-6


def test_deterministic_per_seed(small_graph):
    a = spectral_features(small_graph, 3, seed=4)
    b = spectral_features(small_graph, 3, seed=4)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("k", [0, 21])
def test_k_out_of_range(small_graph, k):
    with pytest.raises(InputError):
        spectral_features(small_graph, k)


@settings(max_examples=25)
@given(st.integers(5, 50), st.integers(0, 10_000), st.integers(1, 5))
def test_rayleigh_quotients_match_oracle(n, seed, k):
    g = generate_random_digraph(n, int(1.5 * n), seed)
    k = min(k, n)
    S = _dense_S(g)
    lam = eigendecompose(S).eigenvalues[::-1][:k]
    V = spectral_features(g, k)
    assert np.abs(V.T @ V - np.eye(k)).max() <= 1e-8
    assert np.abs(np.einsum("ij,ij->j", V, S @ V) - lam).max() <= 1e-6


def test_as_feature_matrix_rejects_bad_input():
    with pytest.raises(ValidationError):
        as_feature_matrix([[1.0, np.nan]])
    with pytest.raises(ValidationError):
        as_feature_matrix(np.ones((3, 2)), n=4)
    X = as_feature_matrix(np.arange(3))
    assert X.shape == (3, 1) and X.dtype == np.float64
