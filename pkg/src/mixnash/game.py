"""Games among mixed-order players: cost/gradient oracles, quadratic games with
exact Nash/monotonicity/Lipschitz oracles, disturbance models, and the
five-vehicle connectivity game."""

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DimensionMismatch, NotStronglyMonotone, SingularSystem

FIRST = "first"
SECOND = "second"
ORDERS = (FIRST, SECOND)

# Compact box on which non-globally-Lipschitz unknown dynamics get a declared constant.
OPERATING_BOX = 10.0


class GameDefinition:
    """An ``n``-player game with ``d``-dimensional actions.

    Parameters
    ----------
    n_players, action_dim:
        Sizes. Profiles are flat vectors of length ``n_players * action_dim``,
        player-major.
    orders:
        One of ``"first"`` / ``"second"`` per player.
    cost:
        ``cost(x) -> (n,)`` array of every player's cost at profile ``x``.
    gradient:
        ``gradient(x) -> (n*d,)`` pseudo-gradient, i.e. each player's gradient
        of its own cost with respect to its own action, stacked.
    cross_hessian:
        Optional ``cross_hessian(x, i, j) -> (d, d)``. When absent, diagnostics
        fall back to finite differences of ``gradient``.
    """

    def __init__(self, n_players, action_dim, orders, cost, gradient, cross_hessian=None, name="game"):
        self.n_players = int(n_players)
        self.action_dim = int(action_dim)
        orders = tuple(orders)
        if len(orders) != self.n_players:
            raise DimensionMismatch(f"{len(orders)} order tags for {self.n_players} players")
        bad = [o for o in orders if o not in ORDERS]
        if bad:
            raise ValueError(f"unknown order tag(s) {bad}; expected 'first' or 'second'")
        self.orders = orders
        self._cost = cost
        self._gradient = gradient
        self._cross_hessian = cross_hessian
        self.name = name

    @property
    def size(self):
        return self.n_players * self.action_dim

    @property
    def first_order(self):
        return np.array([i for i, o in enumerate(self.orders) if o == FIRST], dtype=int)

    @property
    def second_order(self):
        return np.array([i for i, o in enumerate(self.orders) if o == SECOND], dtype=int)

    def block(self, i):
        d = self.action_dim
        return slice(i * d, (i + 1) * d)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise DimensionMismatch(f"profile has shape {x.shape}, expected ({self.size},)")
        return x

    def cost(self, x):
        return np.asarray(self._cost(self._check(x)), dtype=float)

    def pseudo_gradient(self, x):
        return np.asarray(self._gradient(self._check(x)), dtype=float)

    def own_gradient(self, i, x):
        """``∇_i f_i`` evaluated at profile ``x``."""
        return self.pseudo_gradient(x)[self.block(i)]

    def own_gradients(self, profiles):
        """Row ``i`` of the result is ``∇_i f_i`` evaluated at ``profiles[i]``.

        ``profiles`` has shape ``(n, n*d)``; this is how every player evaluates
        its gradient at its own estimate of the profile.
        """
        d = self.action_dim
        out = np.empty((self.n_players, d))
        for i in range(self.n_players):
            out[i] = self._gradient(profiles[i])[i * d:(i + 1) * d]
        return out

    def cross_hessian(self, x, i, j, h=1e-5):
        """``∂²f_i / ∂x_i ∂x_j`` as a ``d × d`` block."""
        x = self._check(x)
        if self._cross_hessian is not None:
            return np.asarray(self._cross_hessian(x, i, j), dtype=float)
        d = self.action_dim
        out = np.empty((d, d))
        for k in range(d):
            e = np.zeros_like(x)
            e[j * d + k] = h
            out[:, k] = (self.own_gradient(i, x + e) - self.own_gradient(i, x - e)) / (2 * h)
        return out


def pseudo_gradient(game, x):
    return game.pseudo_gradient(x)


class QuadraticGame(GameDefinition):
    """Game with costs ``f_i(x) = ½ xᵀ A_i x + b_iᵀ x + c_i``.

    The pseudo-gradient is affine, ``𝒫(x) = B x + c``, where the rows of ``B``
    for player ``i`` are the own-action rows of ``A_i``. Every exact oracle in
    this module (Nash solve, monotonicity and Lipschitz constants) is computed
    from ``B`` and ``c``.
    """

    def __init__(self, hessians, linear, offsets, orders, action_dim=1, name="quadratic"):
        n = len(hessians)
        d = int(action_dim)
        size = n * d
        self.hessians = [0.5 * (np.asarray(a, float) + np.asarray(a, float).T) for a in hessians]
        self.linear = [np.asarray(b, float).reshape(size) for b in linear]
        self.offsets = np.asarray(offsets, float).reshape(n)
        for a in self.hessians:
            if a.shape != (size, size):
                raise DimensionMismatch(f"player hessian has shape {a.shape}, expected {(size, size)}")
        B = np.vstack([self.hessians[i][i * d:(i + 1) * d] for i in range(n)])
        c = np.concatenate([self.linear[i][i * d:(i + 1) * d] for i in range(n)])
        self.B = B
        self.c = c
        # own_gradients fast path: player i reads row-block i of B against its own estimate.
        self._B_rows = B.reshape(n, d, size)
        self._c_rows = c.reshape(n, d)
        super().__init__(n, d, orders, self._quad_cost, self._quad_gradient,
                         self._quad_cross_hessian, name=name)

    @classmethod
    def from_pseudo_gradient(cls, B, c, orders, action_dim=1, name="quadratic"):
        """Build a game whose pseudo-gradient is exactly ``B x + c``.

        Player ``i`` gets ``f_i = ½ x_iᵀ B_ii x_i + x_iᵀ Σ_{j≠i} B_ij x_j + c_iᵀ x_i``,
        which requires the diagonal blocks ``B_ii`` to be symmetric.
        """
        B = np.asarray(B, float)
        c = np.asarray(c, float)
        d = int(action_dim)
        n = B.shape[0] // d
        if B.shape != (n * d, n * d) or c.shape != (n * d,):
            raise DimensionMismatch("B must be (n*d, n*d) and c (n*d,)")
        hessians, linear = [], []
        for i in range(n):
            rows = slice(i * d, (i + 1) * d)
            bii = B[rows, rows]
            if not np.allclose(bii, bii.T):
                raise ValueError(f"diagonal block {i} of B is not symmetric; no cost has this gradient")
            a = np.zeros((n * d, n * d))
            a[rows, :] = B[rows, :]
            a[:, rows] = B[rows, :].T
            a[rows, rows] = bii
            b = np.zeros(n * d)
            b[rows] = c[rows]
            hessians.append(a)
            linear.append(b)
        return cls(hessians, linear, np.zeros(n), orders, d, name=name)

    @classmethod
    def from_terms(cls, players, action_dim, name="quadratic"):
        """Assemble from per-player terms.

        Each entry of ``players`` is a mapping with keys ``order``, ``quad``
        (scalar or ``d × d`` matrix ``m_ii``), ``linear`` (``d``-vector ``m_i``),
        ``offset`` and ``couplings`` (list of ``(j, w)`` with 1-based ``j``). The
        resulting cost is
        ``f_i = x_iᵀ m_ii x_i + x_iᵀ m_i + offset + Σ w ‖x_i − x_j‖²``.
        """
        d = int(action_dim)
        n = len(players)
        size = n * d
        eye = np.eye(d)
        hessians, linear, offsets, orders = [], [], [], []
        for i, p in enumerate(players):
            a = np.zeros((size, size))
            rows = slice(i * d, (i + 1) * d)
            quad = np.asarray(p.get("quad", 0.0), float)
            quad = quad * eye if quad.ndim == 0 else quad
            if quad.shape != (d, d):
                raise DimensionMismatch(f"player {i + 1}: quad must be scalar or {d}x{d}")
            a[rows, rows] += quad + quad.T
            for j, w in p.get("couplings", ()):
                j = int(j) - 1
                if not 0 <= j < n or j == i:
                    raise ValueError(f"player {i + 1}: invalid coupling partner {j + 1}")
                cols = slice(j * d, (j + 1) * d)
                a[rows, rows] += 2 * w * eye
                a[cols, cols] += 2 * w * eye
                a[rows, cols] -= 2 * w * eye
                a[cols, rows] -= 2 * w * eye
            b = np.zeros(size)
            lin = np.asarray(p.get("linear", np.zeros(d)), float)
            lin = np.full(d, float(lin)) if lin.ndim == 0 else lin
            if lin.shape != (d,):
                raise DimensionMismatch(f"player {i + 1}: linear must be scalar or length {d}")
            b[rows] = lin
            hessians.append(a)
            linear.append(b)
            offsets.append(float(p.get("offset", 0.0)))
            orders.append(p.get("order", FIRST))
        return cls(hessians, linear, offsets, orders, d, name=name)

    def _quad_cost(self, x):
        return np.array([0.5 * x @ a @ x + b @ x + c0
                         for a, b, c0 in zip(self.hessians, self.linear, self.offsets)])

    def _quad_gradient(self, x):
        return self.B @ x + self.c

    def _quad_cross_hessian(self, x, i, j):
        return self.B[self.block(i), self.block(j)].copy()

    def own_gradients(self, profiles):
        return np.einsum("ikm,im->ik", self._B_rows, profiles) + self._c_rows


def nash_oracle(game, cond_limit=1e12):
    """Unique Nash equilibrium of a strongly monotone quadratic game, ``B x* = −c``."""
    cond = np.linalg.cond(game.B)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularSystem(f"pseudo-gradient matrix condition number {cond:.3g} exceeds {cond_limit:.0e}")
    return np.linalg.solve(game.B, -game.c)


def monotonicity_constant(game):
    """Largest ``m`` with ``(x−z)ᵀ(𝒫(x)−𝒫(z)) ≥ m‖x−z‖²``: ``λ_min`` of sym(B)."""
    m = float(np.linalg.eigvalsh(0.5 * (game.B + game.B.T))[0])
    if m <= 0:
        raise NotStronglyMonotone(f"λ_min(sym B) = {m:.6g} <= 0")
    return m


def lipschitz_constants(game):
    """Per-player Lipschitz constant of ``∇_i f_i``: spectral norm of its rows of ``B``."""
    d = game.action_dim
    return np.array([np.linalg.norm(game.B[i * d:(i + 1) * d], 2) for i in range(game.n_players)])


def fd_pseudo_gradient(game, x, h=1e-5):
    """Central differences of each player's cost with respect to its own action."""
    x = np.asarray(x, float)
    d = game.action_dim
    out = np.empty_like(x)
    for i in range(game.n_players):
        for k in range(d):
            idx = i * d + k
            e = np.zeros_like(x)
            e[idx] = h
            out[idx] = (game.cost(x + e)[i] - game.cost(x - e)[i]) / (2 * h)
    return out


def gradient_check(game, points, h=1e-5):
    """Worst relative error of the analytic pseudo-gradient against central differences.

    The denominator is ``max(‖𝒫(x)‖, 1)`` so points near a stationary profile
    don't inflate the ratio.
    """
    worst = 0.0
    for x in points:
        g = game.pseudo_gradient(x)
        fd = fd_pseudo_gradient(game, x, h)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1.0))
    return worst


def monotonicity_slack(game, pairs, m):
    """Minimum of ``(x−z)ᵀ(𝒫(x)−𝒫(z)) / ‖x−z‖² − m`` over sampled pairs."""
    worst = np.inf
    for x, z in pairs:
        dx = x - z
        q = dx @ (game.pseudo_gradient(x) - game.pseudo_gradient(z)) / (dx @ dx)
        worst = min(worst, q - m)
    return worst


@dataclass
class DisturbanceModel:
    """Unknown dynamics ``g(x)`` and disturbance ``d(t)`` acting on each player.

    ``unknown(x)`` maps an ``(n, d)`` profile to ``(n, d)``; ``disturbance(t)``
    returns ``(n, d)``. ``eta`` holds declared Lipschitz constants of each
    ``g_i`` (on the operating box when ``g_i`` is only locally Lipschitz) and
    ``bound`` holds ``sup_t |d_i(t)|``. Callbacks must be reentrant.
    """

    unknown: Callable[[np.ndarray], np.ndarray]
    disturbance: Callable[[float], np.ndarray]
    eta: np.ndarray
    bound: np.ndarray
    name: str = "custom"

    def __call__(self, x, t):
        return self.unknown(x) + self.disturbance(t)

    @classmethod
    def zero(cls, n_players, action_dim):
        z = np.zeros((n_players, action_dim))
        z.setflags(write=False)
        return cls(lambda x: z, lambda t: z, np.zeros(n_players), np.zeros(n_players), name="zero")

    def lipschitz_ratios(self, pairs):
        """Largest observed ``‖g_i(x)−g_i(x')‖ / ‖x−x'‖`` per player."""
        n = len(self.eta)
        worst = np.zeros(n)
        for x, xp in pairs:
            num = np.linalg.norm(self.unknown(x) - self.unknown(xp), axis=1)
            worst = np.maximum(worst, num / np.linalg.norm(x - xp))
        return worst


class Vehicles5(NamedTuple):
    game: GameDefinition
    quadratic: QuadraticGame
    disturbance: DisturbanceModel


VEHICLES5_COUPLINGS = {1: [(2, 1.0)], 2: [(3, 1.0)], 3: [(2, 1.0)], 4: [(2, 1.0), (5, 1.0)], 5: [(1, 1.0)]}
VEHICLES5_ORDERS = (FIRST, FIRST, FIRST, SECOND, SECOND)


def _vehicles5_unknown(x):
    g = np.empty((5, 2))
    g[0] = x[1]
    g[1, 0] = x[1, 0] ** 2 + x[2, 0]
    g[1, 1] = x[1, 1]
    g[2] = 3.0 * x[2]
    g[3] = 4.0 * x[3]
    g[4] = 5.0 * x[4]
    return g


_V5_IDX = np.arange(1.0, 6.0)[:, None]


def _vehicles5_disturbance(t):
    return np.repeat(_V5_IDX * np.sin(_V5_IDX * t), 2, axis=1)


def vehicles5_costs(x):
    """Hand-written costs of the five-vehicle connectivity game (flat ``x``)."""
    p = np.asarray(x, float).reshape(5, 2)
    f = np.empty(5)
    for i in range(5):
        k = i + 1
        f[i] = k * p[i] @ p[i] + k * p[i].sum() + k
    f[0] += np.sum((p[0] - p[1]) ** 2)
    f[1] += np.sum((p[1] - p[2]) ** 2)
    f[2] += np.sum((p[2] - p[1]) ** 2)
    f[3] += np.sum((p[3] - p[1]) ** 2) + np.sum((p[3] - p[4]) ** 2)
    f[4] += np.sum((p[4] - p[0]) ** 2)
    return f


def vehicles5_gradient(x):
    p = np.asarray(x, float).reshape(5, 2)
    k = np.arange(1.0, 6.0)[:, None]
    g = 2 * k * p + k
    g[0] += 2 * (p[0] - p[1])
    g[1] += 2 * (p[1] - p[2])
    g[2] += 2 * (p[2] - p[1])
    g[3] += 2 * (p[3] - p[1]) + 2 * (p[3] - p[4])
    g[4] += 2 * (p[4] - p[0])
    return g.ravel()


def vehicles5():
    """Five-vehicle connectivity game with planar actions.

    Vehicle ``i`` pays ``i‖x_i‖² + i·(x_i1 + x_i2) + i`` plus its coupling
    terms; vehicles 1–3 are single integrators and 4–5 double integrators.
    Returns the hand-written game, its quadratic assembly, and the
    unknown-dynamics/disturbance model.
    """
    players = [
        {"order": VEHICLES5_ORDERS[i], "quad": float(i + 1), "linear": [float(i + 1)] * 2,
         "offset": float(i + 1), "couplings": VEHICLES5_COUPLINGS[i + 1]}
        for i in range(5)
    ]
    quad = QuadraticGame.from_terms(players, 2, name="vehicles5")
    game = GameDefinition(5, 2, VEHICLES5_ORDERS, vehicles5_costs, vehicles5_gradient, name="vehicles5")
    # g_2 has an x_21² term: Jacobian Frobenius norm sqrt(4 x_21² + 2) on the operating box.
    eta = np.array([1.0, np.sqrt(4 * OPERATING_BOX ** 2 + 2), 3.0, 4.0, 5.0])
    dist = DisturbanceModel(_vehicles5_unknown, _vehicles5_disturbance, eta,
                            np.arange(1.0, 6.0), name="vehicles5")
    return Vehicles5(game, quad, dist)
