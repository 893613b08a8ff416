"""Communication topology, Laplacian / estimator matrices and a small dense
Lyapunov solver used for convergence diagnostics."""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DisconnectedGraph, InvalidGraph, NotPositiveDefinite


@dataclass(frozen=True)
class CommGraph:
    """Undirected, unweighted communication graph over ``n_players`` nodes.

    ``adjacency`` is stored as a read-only integer array. Construction rejects
    asymmetric, weighted or self-looped matrices; connectivity is checked
    separately (see :func:`is_connected`) because some diagnostics are useful on
    disconnected graphs too.
    """

    n_players: int
    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        n = int(self.n_players)
        if n < 1:
            raise InvalidGraph("n_players must be positive")
        if a.shape != (n, n):
            raise DimensionMismatch(f"adjacency has shape {a.shape}, expected {(n, n)}")
        if not np.all((a == 0) | (a == 1)):
            raise InvalidGraph("adjacency entries must be 0 or 1 (weighted graphs unsupported)")
        if not np.array_equal(a, a.T):
            raise InvalidGraph("adjacency must be symmetric (undirected graph)")
        if np.any(np.diag(a) != 0):
            raise InvalidGraph("adjacency diagonal must be zero")
        a = a.astype(np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "n_players", n)
        object.__setattr__(self, "adjacency", a)

    @classmethod
    def from_edges(cls, n_players, edges):
        """Build from 1-based undirected edge pairs, e.g. ``[[1, 2], [2, 3]]``."""
        a = np.zeros((n_players, n_players), dtype=np.int64)
        for edge in edges:
            if len(edge) != 2:
                raise InvalidGraph(f"edge {edge!r} is not a pair")
            i, j = int(edge[0]), int(edge[1])
            if not (1 <= i <= n_players and 1 <= j <= n_players):
                raise InvalidGraph(f"edge {edge!r} references a node outside 1..{n_players}")
            if i == j:
                raise InvalidGraph(f"self-loop {edge!r} not allowed")
            a[i - 1, j - 1] = a[j - 1, i - 1] = 1
        return cls(n_players, a)

    @classmethod
    def ring(cls, n):
        if n < 3:
            return cls.path(n)
        return cls.from_edges(n, [(i, i % n + 1) for i in range(1, n + 1)])

    @classmethod
    def path(cls, n):
        return cls.from_edges(n, [(i, i + 1) for i in range(1, n)])

    @classmethod
    def complete(cls, n):
        return cls(n, np.ones((n, n), dtype=np.int64) - np.eye(n, dtype=np.int64))

    def edges(self):
        """1-based edge list with i < j."""
        i, j = np.nonzero(np.triu(self.adjacency))
        return [(int(a) + 1, int(b) + 1) for a, b in zip(i, j)]

    def neighbors(self, i):
        """0-based neighbor indices of node ``i`` (0-based)."""
        return np.flatnonzero(self.adjacency[i])


def laplacian(g):
    a = g.adjacency.astype(float)
    return np.diag(a.sum(axis=1)) - a


def is_connected(g):
    """Breadth-first reachability from node 0."""
    seen = np.zeros(g.n_players, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        k = queue.popleft()
        for j in g.neighbors(k):
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def estimator_matrix(g, d=1):
    """``(L ⊗ I_n + A0) ⊗ I_d`` for the stacked estimate vector.

    The stacked estimate is ordered player-major: ``y = [y_1; ...; y_n]`` with
    ``y_i = [y_i1; ...; y_in]`` and every ``y_ij`` a ``d``-vector. ``A0`` is the
    ``n² × n²`` diagonal of the row-major adjacency entries, so ``y_ij`` is
    pinned to the true ``x̄_j`` exactly when ``i`` and ``j`` are neighbors.
    """
    if not is_connected(g):
        raise DisconnectedGraph("estimator matrix is singular on a disconnected graph")
    n = g.n_players
    base = np.kron(laplacian(g), np.eye(n)) + np.diag(g.adjacency.astype(float).ravel())
    if d == 1:
        return base
    return np.kron(base, np.eye(d))


def solve_lyapunov(m, q=None, *, check=True):
    """Solve ``P m + m P = q`` for symmetric positive-definite ``m``.

    Works in the eigenbasis of ``m``: with ``m = U Λ Uᵀ`` and ``q̃ = Uᵀ q U``
    the solution is ``P̃_ij = q̃_ij / (λ_i + λ_j)``. ``q`` defaults to identity.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"m must be square, got shape {m.shape}")
    if q is None:
        q = np.eye(m.shape[0])
    q = np.asarray(q, dtype=float)
    if q.shape != m.shape:
        raise DimensionMismatch(f"q has shape {q.shape}, m has {m.shape}")
    if check and not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise NotPositiveDefinite("m must be symmetric")
    lam, u = np.linalg.eigh(0.5 * (m + m.T))
    if lam[0] <= 0:
        raise NotPositiveDefinite(f"λ_min(m) = {lam[0]:.3g} <= 0")
    qt = u.T @ q @ u
    pt = qt / (lam[:, None] + lam[None, :])
    p = u @ pt @ u.T
    return 0.5 * (p + p.T)
