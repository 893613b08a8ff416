import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from mixnash.errors import DimensionMismatch, DisconnectedGraph, InvalidGraph, NotPositiveDefinite
from mixnash.graph import CommGraph, estimator_matrix, is_connected, laplacian, solve_lyapunov


@st.composite
def graphs(draw, min_n=2, max_n=7):
    n = draw(st.integers(min_n, max_n))
    bits = draw(st.lists(st.booleans(), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2))
    a = np.zeros((n, n), dtype=int)
    a[np.triu_indices(n, 1)] = bits
    return CommGraph(n, a + a.T)


def connected_by_components(g):
    """Second-smallest Laplacian eigenvalue test (independent of the BFS)."""
    if g.n_players == 1:
        return True
    return np.linalg.eigvalsh(laplacian(g))[1] > 1e-9


def test_ring_edges_and_laplacian():
    g = CommGraph.ring(5)
    assert g.edges() == [(1, 2), (1, 5), (2, 3), (3, 4), (4, 5)]
    L = laplacian(g)
    assert np.allclose(L.sum(axis=1), 0)
    assert np.allclose(np.diag(L), 2)
    assert list(g.neighbors(0)) == [1, 4]


def test_small_ring_degenerates_to_path():
    assert CommGraph.ring(2).edges() == [(1, 2)]


@pytest.mark.parametrize("a,exc", [
    (np.array([[0, 1], [0, 0]]), InvalidGraph),
    (np.array([[1, 0], [0, 0]]), InvalidGraph),
    (np.array([[0, 2], [2, 0]]), InvalidGraph),
    (np.zeros((2, 3)), DimensionMismatch),
])
def test_rejects_bad_adjacency(a, exc):
    with pytest.raises(exc):
        CommGraph(2, a)


def test_from_edges_rejects_bad_pairs():
    with pytest.raises(InvalidGraph):
        CommGraph.from_edges(3, [(1, 4)])
    with pytest.raises(InvalidGraph):
        CommGraph.from_edges(3, [(2, 2)])


def test_adjacency_is_read_only():
    g = CommGraph.ring(4)
    with pytest.raises(ValueError):
        g.adjacency[0, 1] = 0


@given(graphs())
@settings(max_examples=80, deadline=None)
def test_bfs_connectivity_matches_spectral(g):
    assert is_connected(g) == connected_by_components(g)


@given(graphs())
@settings(max_examples=60, deadline=None)
def test_estimator_matrix_positive_definite_iff_connected(g):
    if not is_connected(g):
        with pytest.raises(DisconnectedGraph):
            estimator_matrix(g)
        return
    m = estimator_matrix(g)
    assert np.allclose(m, m.T)
    assert np.linalg.eigvalsh(m)[0] > 0


def test_estimator_matrix_blocks_by_hand():
    # path 1-2: player 1's row for its own block has degree 1 and no pin (a_11 = 0)
    g = CommGraph.path(2)
    m = estimator_matrix(g)
    expected = np.array([
        [1.0, 0.0, -1.0, 0.0],
        [0.0, 2.0, 0.0, -1.0],
        [-1.0, 0.0, 2.0, 0.0],
        [0.0, -1.0, 0.0, 1.0],
    ])
    assert np.array_equal(m, expected)
    md = estimator_matrix(g, d=3)
    assert md.shape == (12, 12)
    assert np.array_equal(md, np.kron(expected, np.eye(3)))


def test_ring5_spectrum():
    lam = np.linalg.eigvalsh(estimator_matrix(CommGraph.ring(5)))
    assert lam[0] == pytest.approx(0.32486, abs=1e-4)
    assert lam[-1] == pytest.approx(4.21432, abs=1e-4)


@given(graphs(min_n=2, max_n=5), st.integers(1, 2))
@settings(max_examples=40, deadline=None)
def test_lyapunov_solution_matches_scipy(g, d):
    if not is_connected(g):
        return
    m = estimator_matrix(g, d)
    p = solve_lyapunov(m)
    # scipy solves A X + X Aᴴ = Q; with A = −m and Q = −I this is X m + m X = I
    ref = scipy.linalg.solve_continuous_lyapunov(-m, -np.eye(m.shape[0]))
    assert np.allclose(p, ref, atol=1e-10)
    assert np.allclose(p @ m + m @ p, np.eye(m.shape[0]), atol=1e-10)
    assert np.linalg.eigvalsh(p)[0] > 0


def test_lyapunov_custom_rhs(rng):
    a = rng.normal(size=(4, 4))
    m = a @ a.T + 4 * np.eye(4)
    b = rng.normal(size=(4, 4))
    q = b + b.T
    p = solve_lyapunov(m, q)
    assert np.allclose(p @ m + m @ p, q, atol=1e-12)


def test_lyapunov_errors():
    with pytest.raises(DimensionMismatch):
        solve_lyapunov(np.ones((2, 3)))
    with pytest.raises(NotPositiveDefinite):
        solve_lyapunov(np.diag([1.0, -1.0]))
    with pytest.raises(NotPositiveDefinite):
        solve_lyapunov(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DimensionMismatch):
        solve_lyapunov(np.eye(2), np.eye(3))
