"""Closed-loop assembly, fixed-step RK4 integration, trajectories and
convergence diagnostics."""

import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .controller import Gains, SeekerState
from .errors import (DimensionMismatch, DisconnectedGraph, NoKnownEquilibrium,
                     NonFiniteDerivative, NonFiniteState, SingularSystem)
from .game import QuadraticGame, nash_oracle
from .graph import estimator_matrix, is_connected, solve_lyapunov
from .rbfnn import CAP_RTOL, RbfParams

FULL = "full"
DISTURBANCE_FREE = "disturbance_free"
VARIANTS = (FULL, DISTURBANCE_FREE)

# Largest |h λ| on the negative real axis for which classical RK4 is stable is ≈ 2.785.
RK4_REAL_STABILITY = 2.785
BLOWUP_LIMIT = 1e12


class StepSizeWarning(UserWarning):
    pass


@dataclass
class Scenario:
    """A complete experiment.

    ``v0`` has one row per second-order player, ``z0`` one row per first-order
    player (defaults to their initial actions). ``y0`` is ``"seeded"`` (every
    player starts with the true initial reference profile), ``"zero"`` or an
    explicit ``(n, n*d)`` array.
    """

    game: object
    graph: object
    x0: np.ndarray
    gains: Gains = field(default_factory=Gains)
    rbf: RbfParams = None
    disturbance: object = None
    v0: np.ndarray = None
    z0: np.ndarray = None
    y0: object = "seeded"
    W0: np.ndarray = None
    dt: float = 1e-3
    t_final: float = 10.0
    stride: int = 10
    variant: str = FULL
    name: str = "scenario"

    def __post_init__(self):
        g = self.game
        n, d = g.n_players, g.action_dim
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_final >= self.dt:
            raise ValueError("t_final must be at least dt")
        if int(self.stride) < 1:
            raise ValueError("stride must be a positive integer")
        self.stride = int(self.stride)
        if self.graph.n_players != n:
            raise DimensionMismatch(f"graph has {self.graph.n_players} nodes, game has {n} players")
        if not is_connected(self.graph):
            raise DisconnectedGraph("communication graph must be connected")
        if self.variant == FULL and self.disturbance is None:
            raise ValueError("variant 'full' needs a disturbance model (use DisturbanceModel.zero for none)")
        if self.rbf is None:
            self.rbf = RbfParams.default(n * d)
        if self.rbf.input_dim != n * d:
            raise DimensionMismatch(f"RBF centers have dimension {self.rbf.input_dim}, estimates have {n * d}")
        self.x0 = np.asarray(self.x0, float).reshape(n, d)
        nf = len(g.first_order)
        self.v0 = np.zeros((n - nf, d)) if self.v0 is None else np.asarray(self.v0, float).reshape(n - nf, d)
        self.z0 = self.x0[g.first_order].copy() if self.z0 is None else np.asarray(self.z0, float).reshape(nf, d)
        if self.W0 is None:
            self.W0 = np.zeros((n, self.rbf.q, d))
        self.W0 = np.asarray(self.W0, float).reshape(n, self.rbf.q, d)

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))

    def initial_state(self):
        g = self.game
        n, d = g.n_players, g.action_dim
        xb = self.x0.copy()
        xb[g.first_order] = self.z0
        if isinstance(self.y0, str):
            if self.y0 == "seeded":
                y = np.tile(xb.ravel(), (n, 1))
            elif self.y0 == "zero":
                y = np.zeros((n, n * d))
            else:
                raise ValueError(f"y0 must be 'seeded', 'zero' or an array, got {self.y0!r}")
        else:
            y = np.asarray(self.y0, float).reshape(n, n * d)
        return SeekerState(g.orders, self.x0.copy(), self.v0.copy(), self.z0.copy(), y, self.W0.copy())

    def with_overrides(self, **changes):
        return replace(self, **changes)


class StateLayout:
    """Flat state vector ``[x_f, z_f, x_s, v_s, y, Ŵ]``; players in index order inside each block."""

    def __init__(self, game, q):
        n, d = game.n_players, game.action_dim
        self.orders = game.orders
        self.n, self.d, self.q = n, d, q
        self.first = game.first_order
        self.second = game.second_order
        nf, ns = len(self.first), len(self.second)
        o = np.cumsum([0, nf * d, nf * d, ns * d, ns * d, n * n * d, n * q * d])
        self.xf, self.zf, self.xs, self.vs, self.y, self.W = (slice(a, b) for a, b in zip(o[:-1], o[1:]))
        self.size = int(o[-1])
        self.core = int(o[5])  # everything except the weights
        # flat positions of each player's action, reference entry and input channel, player order
        x_idx = np.empty((n, d), dtype=int)
        xbar_idx = np.empty((n, d), dtype=int)
        chan_idx = np.empty((n, d), dtype=int)
        k = np.arange(d)
        for r, i in enumerate(self.first):
            x_idx[i] = self.xf.start + r * d + k
            xbar_idx[i] = self.zf.start + r * d + k
            chan_idx[i] = self.xf.start + r * d + k
        for r, i in enumerate(self.second):
            x_idx[i] = self.xs.start + r * d + k
            xbar_idx[i] = self.xs.start + r * d + k
            chan_idx[i] = self.vs.start + r * d + k
        self.x_idx = x_idx.ravel()
        self.xbar_idx = xbar_idx.ravel()
        self.chan_idx = chan_idx.ravel()

    def pack(self, state):
        s = np.empty(self.size)
        s[self.xf] = state.x[self.first].ravel()
        s[self.zf] = state.z.ravel()
        s[self.xs] = state.x[self.second].ravel()
        s[self.vs] = state.v.ravel()
        s[self.y] = state.y.ravel()
        s[self.W] = state.W.ravel()
        return s

    def unpack(self, s):
        s = np.asarray(s, float)
        if s.shape != (self.size,):
            raise DimensionMismatch(f"flat state has shape {s.shape}, expected ({self.size},)")
        n, d = self.n, self.d
        return SeekerState(self.orders, s[self.x_idx].reshape(n, d), s[self.vs].reshape(-1, d),
                           s[self.zf].reshape(-1, d), s[self.y].reshape(n, n * d),
                           s[self.W].reshape(n, self.q, d))


class ClosedLoop:
    """Vectorized closed-loop vector field for a scenario.

    Every term that is linear in the flat state is assembled once into a
    matrix: the first-order regulation, the second-order velocity damping, the
    estimator and, for quadratic games, the gradient-play terms (the
    pseudo-gradient is affine there). The network, damping and unknown-dynamics
    terms are added on top in the full variant. Call as ``f(t, s)``.
    """

    def __init__(self, scenario):
        sc = scenario
        g = sc.game
        self.scenario = sc
        self.game = g
        self.layout = L = StateLayout(g, sc.rbf.q)
        n, d, N = L.n, L.d, g.size
        k1, k2, k3, k4 = sc.gains.k1, sc.gains.k2, sc.gains.k3, sc.gains.k4
        self.full = sc.variant == FULL
        self.M = estimator_matrix(sc.graph, d)
        D0 = L.core
        A = np.zeros((D0, D0))
        nfd = L.xf.stop - L.xf.start
        nsd = L.xs.stop - L.xs.start
        rf = np.arange(nfd)
        A[L.xf.start + rf, L.xf.start + rf] = -k1
        A[L.xf.start + rf, L.zf.start + rf] = k1
        rs = np.arange(nsd)
        A[L.xs.start + rs, L.vs.start + rs] = 1.0
        A[L.vs.start + rs, L.vs.start + rs] = -k4
        # ẏ = −k3 M y + k3 M (𝟙 ⊗ x̄)
        A[L.y, L.y] = -k3 * self.M
        tile = np.zeros((n * N, D0))
        for i in range(n):
            tile[i * N + np.arange(N), L.xbar_idx] = 1.0
        A[L.y, :] += k3 * self.M @ tile
        # own-gradient injection: ż_f gets −k2 ∇, v̇_s gets −k2 k4 ∇
        K = np.zeros((D0, N))
        own_f = np.concatenate([np.arange(i * d, (i + 1) * d) for i in L.first]) if len(L.first) else np.zeros(0, int)
        own_s = np.concatenate([np.arange(i * d, (i + 1) * d) for i in L.second]) if len(L.second) else np.zeros(0, int)
        K[L.zf.start + rf, own_f] = -k2
        K[L.vs.start + rs, own_s] = -k2 * k4
        # regulation signal e = E s + Ke ∇ (player order)
        E = np.zeros((N, D0))
        Ke = np.zeros((N, N))
        for r, i in enumerate(L.first):
            for k in range(d):
                E[i * d + k, L.xf.start + r * d + k] = 1.0
                E[i * d + k, L.zf.start + r * d + k] = -1.0
        for r, i in enumerate(L.second):
            for k in range(d):
                E[i * d + k, L.vs.start + r * d + k] = 1.0
                Ke[i * d + k, i * d + k] = k2
        b = np.zeros(D0)
        e0 = np.zeros(N)
        self.affine_gradient = isinstance(g, QuadraticGame)
        if self.affine_gradient:
            # ∇_i f_i(y_i) = B_i y_i + c_i is linear in the stacked estimate
            G = np.zeros((N, D0))
            for i in range(n):
                G[i * d:(i + 1) * d, L.y.start + i * N:L.y.start + (i + 1) * N] = g.B[i * d:(i + 1) * d]
            A += K @ G
            b += K @ g.c
            E += Ke @ G
            e0 += Ke @ g.c
        self.A, self.b, self.K, self.E, self.Ke, self.e0 = A, b, K, E, Ke, e0
        rbf = sc.rbf
        self.centers = rbf.centers
        self.inv_w2 = 1.0 / rbf.widths ** 2
        self.beta, self.w_max = rbf.beta, rbf.w_max
        self.delta, self.epsilon, self.kappa = rbf.delta, rbf.epsilon, rbf.kappa
        self.phi_gain = self.kappa * self.delta / self.epsilon
        self.disturbance = sc.disturbance

    def own_gradients(self, s):
        L = self.layout
        return self.game.own_gradients(s[L.y].reshape(L.n, self.game.size))

    def __call__(self, t, s):
        L = self.layout
        D0 = L.core
        out = np.empty(L.size)
        core = s[:D0]
        out[:D0] = self.A @ core
        out[:D0] += self.b
        if self.affine_gradient:
            e = self.E @ core
            e += self.e0
        else:
            grad = self.own_gradients(s).ravel()
            out[:D0] += self.K @ grad
            e = self.E @ core + self.Ke @ grad
        if not self.full:
            out[L.W] = 0.0
            return out
        n, d, q = L.n, L.d, L.q
        Y = s[L.y].reshape(n, 1, -1)
        diff = Y - self.centers
        S = np.exp(-np.einsum("nqk,nqk->nq", diff, diff) * self.inv_w2)
        W = s[L.W].reshape(n, q, d)
        e = e.reshape(n, d)
        nn = np.matmul(S[:, None, :], W).reshape(n, d)
        phi = self.delta * np.tanh(self.phi_gain * e)
        x = s[L.x_idx].reshape(n, d)
        w = self.disturbance.unknown(x) + self.disturbance.disturbance(t)
        out[L.chan_idx] += (w - nn - phi).ravel()
        dW = self.beta * S[:, :, None] * e[:, None, :]
        tr = np.einsum("nqd,nqd->n", W, W)
        cap = tr >= self.w_max * (1 - CAP_RTOL)
        if cap.any():
            for i in np.flatnonzero(cap):
                inner = e[i] @ (W[i].T @ S[i])
                if inner >= 0:
                    dW[i] -= (self.beta * inner / tr[i]) * W[i]
        out[L.W] = dW.ravel()
        return out

    def clamp_weights(self, s):
        """Radially rescale any player's weights that drifted past the cap (in place)."""
        if not self.full:
            return
        L = self.layout
        W = s[L.W].reshape(L.n, -1)
        tr = np.einsum("nk,nk->n", W, W)
        over = tr > self.w_max
        if over.any():
            W[over] *= np.sqrt(self.w_max / tr[over])[:, None]

    def stiffness(self):
        """Fastest linear rate of the closed loop: ``max(k1, k3 λ_max(M), k4)``."""
        gains = self.scenario.gains
        lam = float(np.linalg.eigvalsh(self.M)[-1])
        return max(gains.k1, gains.k3 * lam, gains.k4)

    def damping_slope(self):
        """Linearized slope of the damping term at zero, ``κ δ² / ε`` (full variant only)."""
        return self.phi_gain * self.delta if self.full else 0.0


def closed_loop_derivative(scenario, state, t=0.0, vector_field=None):
    """Derivative of the flat state ``[x_f, z_f, x_s, v_s, y, Ŵ]`` at time ``t``.

    ``state`` may be a :class:`SeekerState` or an already packed vector.
    """
    f = vector_field or ClosedLoop(scenario)
    s = f.layout.pack(state) if isinstance(state, SeekerState) else np.asarray(state, float)
    ds = f(t, s)
    bad = np.flatnonzero(~np.isfinite(ds))
    if bad.size:
        raise NonFiniteDerivative(bad[0], ds[bad[0]])
    return ds


def check_step_size(f, dt):
    """Warn when ``dt`` is too coarse for the closed loop's fastest modes."""
    lim = 0.5 / f.stiffness()
    if dt > lim:
        warnings.warn(f"dt={dt:g} exceeds 0.5/max(k1, k3 λ_max(M), k4) = {lim:.3g}", StepSizeWarning, stacklevel=3)
    if f.full:
        gains = f.scenario.gains
        fast = max(gains.k1, gains.k4) + f.damping_slope()
        if dt * fast >= RK4_REAL_STABILITY:
            warnings.warn(
                f"dt={dt:g} puts the damping term's linearized rate {fast:.4g} outside the RK4 "
                f"stability interval (dt must be < {RK4_REAL_STABILITY / fast:.3g}); expect chattering",
                StepSizeWarning, stacklevel=3)


def rk4(f, s0, t0, dt, n_steps, stride=1, post_step=None):
    """Classical fixed-step RK4 from ``t0``; returns times and states every ``stride`` steps.

    ``post_step(s)`` may modify the committed state in place.
    """
    s = np.array(s0, float)
    n_rec = n_steps // stride + 1
    times = np.empty(n_rec)
    states = np.empty((n_rec, s.size))
    times[0], states[0] = t0, s
    h2, h6 = dt / 2, dt / 6
    r = 1
    for k in range(n_steps):
        t = t0 + k * dt
        k1 = f(t, s)
        k2 = f(t + h2, s + h2 * k1)
        k3 = f(t + h2, s + h2 * k2)
        k4 = f(t + dt, s + dt * k3)
        k2 += k3
        k2 *= 2.0
        k1 += k2
        k1 += k4
        s = s + h6 * k1
        if post_step is not None:
            post_step(s)
        if not math.isfinite(s.sum()):
            raise NonFiniteState(t + dt, float("nan"), int(np.flatnonzero(~np.isfinite(s))[0]))
        if (k + 1) % stride == 0:
            m = np.abs(s).max()
            if m > BLOWUP_LIMIT:
                raise NonFiniteState(t + dt, float(m), int(np.argmax(np.abs(s))))
            times[r] = t0 + (k + 1) * dt
            states[r] = s
            r += 1
    return times[:r], states[:r]


def equilibrium(game):
    """Nash equilibrium for quadratic games, ``None`` otherwise."""
    if isinstance(game, QuadraticGame):
        try:
            return nash_oracle(game)
        except SingularSystem:
            return None
    return None


@dataclass
class Trajectory:
    """Recorded run: times and flat states plus derived series.

    ``err_x`` is ``‖x − x*‖₂``, ``err_v`` is ``‖v_s‖₂``, ``wnorm`` is
    ``trace(Ŵ_iᵀŴ_i)`` per player and ``V`` the Lyapunov surrogate; the
    ``x*``-dependent series are NaN when the equilibrium is unknown.
    """

    scenario: Scenario
    layout: StateLayout
    t: np.ndarray
    states: np.ndarray
    x_star: np.ndarray = None
    runtime: float = 0.0
    err_x: np.ndarray = field(init=False, repr=False)
    err_v: np.ndarray = field(init=False, repr=False)
    wnorm: np.ndarray = field(init=False, repr=False)
    V: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        L = self.layout
        K = len(self.t)
        if self.x_star is not None:
            self.err_x = np.linalg.norm(self.states[:, L.x_idx] - self.x_star, axis=1)
            self.V = lyapunov_series(self.scenario, self.states, self.x_star, L)
        else:
            self.err_x = np.full(K, np.nan)
            self.V = np.full(K, np.nan)
        self.err_v = np.linalg.norm(self.states[:, L.vs], axis=1)
        W = self.states[:, L.W].reshape(K, L.n, -1)
        self.wnorm = np.einsum("tnk,tnk->tn", W, W)

    @property
    def x(self):
        return self.states[:, self.layout.x_idx].reshape(len(self.t), self.layout.n, self.layout.d)

    @property
    def v(self):
        return self.states[:, self.layout.vs].reshape(len(self.t), -1, self.layout.d)

    @property
    def z(self):
        return self.states[:, self.layout.zf].reshape(len(self.t), -1, self.layout.d)

    @property
    def y(self):
        L = self.layout
        return self.states[:, L.y].reshape(len(self.t), L.n, L.n * L.d)

    def state_at(self, k):
        return self.layout.unpack(self.states[k])

    @property
    def final(self):
        return self.state_at(-1)


def integrate(scenario, vector_field=None, check_dt=True):
    """Integrate a scenario with fixed-step RK4, clamping weights onto the cap after each step."""
    f = vector_field or ClosedLoop(scenario)
    if check_dt:
        check_step_size(f, scenario.dt)
    s0 = f.layout.pack(scenario.initial_state())
    post = f.clamp_weights if f.full else None
    start = time.perf_counter()
    # non-finite states are detected and raised by rk4 itself
    with np.errstate(over="ignore", invalid="ignore"):
        times, states = rk4(f, s0, 0.0, scenario.dt, scenario.n_steps, scenario.stride, post)
    runtime = time.perf_counter() - start
    return Trajectory(scenario, f.layout, times, states, equilibrium(scenario.game), runtime)


def lyapunov_matrix(scenario):
    """``P`` solving ``P M + M P = I`` for the lifted estimator matrix ``M``."""
    return solve_lyapunov(estimator_matrix(scenario.graph, scenario.game.action_dim))


def lyapunov_series(scenario, states, x_star, layout=None, P=None):
    g = scenario.game
    L = layout or StateLayout(g, scenario.rbf.q)
    if P is None:
        P = lyapunov_matrix(scenario)
    states = np.atleast_2d(states)
    K = states.shape[0]
    n, d, N = L.n, L.d, g.size
    k2 = scenario.gains.k2
    xb = states[:, L.xbar_idx]
    V = 0.5 * np.sum((xb - x_star) ** 2, axis=1)
    if len(L.second):
        Y = states[:, L.y].reshape(K, n, N)
        vbar = states[:, L.vs].reshape(K, -1, d).copy()
        for r, i in enumerate(L.second):
            if isinstance(g, QuadraticGame):
                vbar[:, r] += k2 * (Y[:, i] @ g.B[i * d:(i + 1) * d].T + g.c[i * d:(i + 1) * d])
            else:
                vbar[:, r] += k2 * np.array([g.own_gradient(i, yk) for yk in Y[:, i]])
        V += 0.5 * np.sum(vbar.reshape(K, -1) ** 2, axis=1)
    V += 0.5 * np.sum((states[:, L.xf] - states[:, L.zf]) ** 2, axis=1)
    ey = states[:, L.y] - np.tile(xb, (1, n))
    V += np.einsum("ki,ij,kj->k", ey, P, ey)
    if scenario.variant == FULL:
        V += np.sum(states[:, L.W] ** 2, axis=1) / (2 * scenario.rbf.beta)
    return V


def lyapunov_surrogate(scenario, state, x_star=None, P=None):
    """``½‖x̄−x*‖² + ½‖v̄_s‖² + ½‖x_f−z_f‖² + (y−𝟙⊗x̄)ᵀP(y−𝟙⊗x̄)``, plus
    ``Σ tr(Ŵ_iᵀŴ_i)/(2β)`` in the full variant."""
    if x_star is None:
        if not isinstance(scenario.game, QuadraticGame):
            raise NoKnownEquilibrium("Lyapunov surrogate needs a known equilibrium (quadratic game)")
        x_star = nash_oracle(scenario.game)
    L = StateLayout(scenario.game, scenario.rbf.q)
    s = L.pack(state) if isinstance(state, SeekerState) else np.asarray(state, float)
    return float(lyapunov_series(scenario, s, x_star, L, P)[0])


def fit_decay_rate(t, err, floor_rel=1e-11):
    """Least-squares exponential rate of ``err`` over the last half of its informative part.

    Samples from the first time ``err`` drops below ``floor_rel * max(err)``
    onward sit at round-off level and are excluded; the fit then uses the last
    half of what remains. Returns ``None`` when there is nothing to fit.
    """
    t = np.asarray(t, float)
    err = np.asarray(err, float)
    if err.size == 0 or not np.all(np.isfinite(err)):
        return None
    peak = err.max()
    if peak <= 0:
        return None
    below = np.flatnonzero(err < floor_rel * peak)
    stop = below[0] if below.size else err.size
    lo = stop // 2
    tw, ew = t[lo:stop], err[lo:stop]
    if tw.size < 3 or np.any(ew <= 0):
        return None
    slope = np.polyfit(tw, np.log(ew), 1)[0]
    return float(-slope)


def time_to_tolerance(t, err, tol):
    """First recorded time after which ``err`` stays at or below ``tol``."""
    above = np.flatnonzero(~(np.asarray(err) <= tol))
    if above.size == 0:
        return float(t[0])
    if above[-1] == len(err) - 1:
        return None
    return float(t[above[-1] + 1])


SCHEMA_VERSION = 1


def metrics(traj, x_star=None, tolerances=(1e-1, 1e-2, 1e-3), window=0.1):
    x_star = traj.x_star if x_star is None else np.asarray(x_star, float)
    K = len(traj.t)
    w = max(1, int(math.ceil(window * K)))
    if x_star is not None:
        err = np.linalg.norm(traj.states[:, traj.layout.x_idx] - x_star, axis=1)
        final_dev = traj.states[-1, traj.layout.x_idx] - x_star
        final_2, final_inf = float(np.linalg.norm(final_dev)), float(np.abs(final_dev).max())
        rate = fit_decay_rate(traj.t, err)
        ttt = {f"{tol:g}": time_to_tolerance(traj.t, err, tol) for tol in tolerances}
        fw = float(err[-w:].mean())
    else:
        final_2 = final_inf = fw = None
        rate = None
        ttt = {f"{tol:g}": None for tol in tolerances}
    sc = traj.scenario
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": sc.name,
        "variant": sc.variant,
        "dt": sc.dt,
        "t_final": float(traj.t[-1]),
        "final_err_2": final_2,
        "final_err_inf": final_inf,
        "final_vnorm": float(traj.err_v[-1]),
        "final_window_err": fw,
        "fitted_rate": rate,
        "time_to_tol": ttt,
        "max_wnorm": float(traj.wnorm.max()),
        "blown_up": False,
        "runtime_s": traj.runtime,
    }
