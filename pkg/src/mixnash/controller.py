"""Per-player Nash-seeking laws for first- and second-order players, the
auxiliary ``z`` dynamics and the distributed consensus estimator.

These functions evaluate one player at a time from a :class:`SeekerState` and
read only what that player is allowed to know: its own action/velocity/
auxiliary state, its own estimate ``y_i``, its neighbors' estimates and the
reference entries ``x̄_j`` of its neighbors. :mod:`mixnash.sim` assembles the
same laws in vectorized form for integration.
"""

from dataclasses import dataclass

import numpy as np

from . import rbfnn
from .errors import DimensionMismatch, WrongOrder
from .game import FIRST, SECOND


@dataclass(frozen=True)
class Gains:
    k1: float = 100.0
    k2: float = 0.8
    k3: float = 115.0
    k4: float = 300.0

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "k4"):
            if not getattr(self, name) > 0:
                raise ValueError(f"gain {name} must be strictly positive, got {getattr(self, name)!r}")

    def scaled(self, factor):
        return Gains(self.k1 * factor, self.k2 * factor, self.k3 * factor, self.k4 * factor)


@dataclass
class SeekerState:
    """Everything the players carry.

    ``x`` is ``(n, d)``; ``v`` holds rows for second-order players only and
    ``z`` rows for first-order players only, both in player order. ``y`` is
    ``(n, n*d)`` (row ``i`` is player ``i``'s estimate of ``x̄``) and ``W`` is
    ``(n, q, d)``.
    """

    orders: tuple
    x: np.ndarray
    v: np.ndarray
    z: np.ndarray
    y: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        n = len(self.orders)
        self.x = np.asarray(self.x, float)
        d = self.x.shape[1]
        nf = sum(o == FIRST for o in self.orders)
        self.v = np.asarray(self.v, float).reshape(n - nf, d)
        self.z = np.asarray(self.z, float).reshape(nf, d)
        self.y = np.asarray(self.y, float).reshape(n, n * d)
        self.W = np.asarray(self.W, float).reshape(n, -1, d)
        self._row = {}
        fi = si = 0
        for i, o in enumerate(self.orders):
            if o == FIRST:
                self._row[i] = fi
                fi += 1
            else:
                self._row[i] = si
                si += 1

    @property
    def n(self):
        return len(self.orders)

    @property
    def d(self):
        return self.x.shape[1]

    def z_of(self, i):
        if self.orders[i] != FIRST:
            raise WrongOrder(f"player {i + 1} is second-order and has no auxiliary z")
        return self.z[self._row[i]]

    def v_of(self, i):
        if self.orders[i] != SECOND:
            raise WrongOrder(f"player {i + 1} is first-order and has no velocity")
        return self.v[self._row[i]]

    def copy(self):
        return SeekerState(self.orders, self.x.copy(), self.v.copy(), self.z.copy(),
                           self.y.copy(), self.W.copy())

    def is_finite(self):
        return all(np.isfinite(a).all() for a in (self.x, self.v, self.z, self.y, self.W))


def xbar(state):
    """Reference profile tracked by the estimator: ``z_j`` for first-order players,
    ``x_j`` for second-order players."""
    out = state.x.copy()
    for i, o in enumerate(state.orders):
        if o == FIRST:
            out[i] = state.z_of(i)
    return out.ravel()


def estimator_derivative(i, state, graph, k3):
    """``ẏ_ij = −k3 (Σ_k a_ik (y_ij − y_kj) + a_ij (y_ij − x̄_j))`` for every block ``j``."""
    n, d = state.n, state.d
    a = graph.adjacency
    y = state.y.reshape(n, n, d)
    xb = xbar(state).reshape(n, d)
    out = np.zeros((n, d))
    for j in range(n):
        acc = np.zeros(d)
        for k in graph.neighbors(i):
            acc += a[i, k] * (y[i, j] - y[k, j])
        if a[i, j]:
            acc += a[i, j] * (y[i, j] - xb[j])
        out[j] = -k3 * acc
    return out.ravel()


def estimator_field(state, graph, k3, m=None):
    """Stacked estimator dynamics ``−k3 (L⊗I + A0)⊗I_d (y − 𝟙⊗x̄)``."""
    from .graph import estimator_matrix

    if m is None:
        m = estimator_matrix(graph, state.d)
    err = state.y.ravel() - np.tile(xbar(state), state.n)
    return -k3 * (m @ err)


def regulation_signal(i, state, game, k2):
    """``x_i − z_i`` for first-order players, ``k2 ∇_i f_i(y_i) + v_i`` for second-order."""
    if state.orders[i] == FIRST:
        return state.x[i] - state.z_of(i)
    return k2 * game.own_gradient(i, state.y[i]) + state.v_of(i)


def _compensation(i, state, e, rbf):
    if rbf is None:
        return 0.0
    net = rbf.network(state.d, state.W[i])
    if net.input_dim != state.y.shape[1]:
        raise DimensionMismatch(f"network input dim {net.input_dim} != estimate dim {state.y.shape[1]}")
    nn = rbfnn.approximate(net, state.y[i])
    return nn + rbfnn.damping_phi(e, rbf.delta, rbf.epsilon, rbf.kappa)


def control_first_order(i, state, game, gains, rbf=None):
    """``u_i = −k1 (x_i − z_i) − Ŵ_iᵀ S(y_i) − φ_i``; with ``rbf=None`` the
    network and damping terms are dropped (disturbance-free law)."""
    if state.orders[i] != FIRST:
        raise WrongOrder(f"player {i + 1} is not a first-order player")
    e = state.x[i] - state.z_of(i)
    return -gains.k1 * e - _compensation(i, state, e, rbf)


def z_derivative(i, state, game, k2):
    """``ż_i = −k2 ∇_i f_i(y_i)``, evaluated at the player's own estimate."""
    if state.orders[i] != FIRST:
        raise WrongOrder(f"player {i + 1} is not a first-order player")
    return -k2 * game.own_gradient(i, state.y[i])


def control_second_order(i, state, game, gains, rbf=None):
    """``u_i = −k2 k4 ∇_i f_i(y_i) − k4 v_i − Ŵ_iᵀ S(y_i) − φ_i``."""
    if state.orders[i] != SECOND:
        raise WrongOrder(f"player {i + 1} is not a second-order player")
    grad = game.own_gradient(i, state.y[i])
    v = state.v_of(i)
    e = gains.k2 * grad + v
    return -gains.k2 * gains.k4 * grad - gains.k4 * v - _compensation(i, state, e, rbf)


def weight_rate(i, state, game, gains, rbf):
    """Adaptive law for player ``i``'s weights, driven by its regulation signal."""
    net = rbf.network(state.d, state.W[i])
    s = rbfnn.activation(net, state.y[i])
    return rbfnn.weight_derivative(net, s, regulation_signal(i, state, game, gains.k2))
