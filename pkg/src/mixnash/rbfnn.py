"""Gaussian radial-basis-function networks with a norm-capped adaptive weight
law, plus the tanh damping term used to dominate bounded residuals."""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CapViolated, DimensionMismatch

# Relative tolerance for "at the cap": exact equality never happens in floating point.
CAP_RTOL = 1e-9


@lru_cache(maxsize=None)
def tanh_kappa(tol=1e-15, damping=0.78):
    """Fixed point of ``κ ↦ exp(−(κ+1))`` (≈ 0.2784645), found by damped iteration.

    The undamped map is already a contraction (slope −κ), the damping just
    speeds it up.
    """
    k = 0.25
    for _ in range(200):
        nxt = (1.0 - damping) * k + damping * math.exp(-(k + 1.0))
        if abs(nxt - k) < tol:
            return nxt
        k = nxt
    return k


def damping_phi(e, delta, epsilon, kappa=None):
    """``δ tanh(κ δ e / ε)`` applied component-wise; ``|φ| < δ``."""
    if kappa is None:
        kappa = tanh_kappa()
    return delta * np.tanh(kappa * delta * np.asarray(e, float) / epsilon)


def linspace_centers(lo, hi, count):
    return np.linspace(lo, hi, int(count))


def diagonal_centers(values, input_dim):
    """Place scalar centers on the diagonal of the input space: ``μ_k = c_k·𝟙``."""
    values = np.asarray(values, float).reshape(-1, 1)
    return values * np.ones((1, int(input_dim)))


@dataclass
class RbfNetwork:
    """One player's network: ``ŴᵀS(z)`` with Gaussian activations.

    ``centers`` is ``(q, input_dim)``, ``widths`` is ``(q,)``, ``weights`` is
    ``(q, d_out)``. The cap ``w_max`` bounds ``trace(ŴᵀŴ)``.
    """

    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray
    w_max: float
    beta: float

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, float))
        q = self.centers.shape[0]
        self.widths = np.broadcast_to(np.asarray(self.widths, float), (q,)).copy()
        if np.any(self.widths <= 0):
            raise ValueError("RBF widths must be positive")
        self.weights = np.asarray(self.weights, float).reshape(q, -1).copy()
        if self.w_max <= 0 or self.beta <= 0:
            raise ValueError("w_max and beta must be positive")
        if self.weight_norm() > self.w_max * (1 + CAP_RTOL):
            raise CapViolated(f"initial trace(WᵀW) = {self.weight_norm():.6g} exceeds w_max = {self.w_max}")

    @property
    def q(self):
        return self.centers.shape[0]

    @property
    def input_dim(self):
        return self.centers.shape[1]

    @property
    def output_dim(self):
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, centers, widths, output_dim, w_max, beta):
        centers = np.atleast_2d(np.asarray(centers, float))
        return cls(centers, widths, np.zeros((centers.shape[0], output_dim)), w_max, beta)

    def weight_norm(self):
        """``trace(ŴᵀŴ)``, the quantity the cap applies to."""
        return float(np.sum(self.weights * self.weights))


def activation(net, z):
    z = np.asarray(z, float)
    if z.shape != (net.input_dim,):
        raise DimensionMismatch(f"input has shape {z.shape}, expected ({net.input_dim},)")
    diff = z[None, :] - net.centers
    return np.exp(-np.sum(diff * diff, axis=1) / net.widths ** 2)


def approximate(net, z):
    return net.weights.T @ activation(net, z)


def weight_derivative(net, s, e):
    """Projected adaptive law ``dŴ/dt`` for activation ``s`` and regulation signal ``e``.

    Below the cap, or at the cap with ``eᵀŴᵀS < 0`` (pointing inward), the
    update is ``β S eᵀ``. At the cap pointing outward the radial component is
    removed, so ``⟨Ŵ, dŴ/dt⟩ = 0``.
    """
    s = np.asarray(s, float).reshape(net.q)
    e = np.asarray(e, float).reshape(net.output_dim)
    return _projected_rate(net.weights, s, e, net.w_max, net.beta)


def _projected_rate(w, s, e, w_max, beta):
    tr = float(np.sum(w * w))
    if tr > w_max * (1 + CAP_RTOL):
        raise CapViolated(f"trace(WᵀW) = {tr:.12g} exceeds w_max = {w_max}")
    rate = beta * np.outer(s, e)
    if tr >= w_max * (1 - CAP_RTOL):
        inner = float(e @ (w.T @ s))
        if inner >= 0:
            rate -= (beta * inner / tr) * w
    return rate


def project_onto_cap(w, w_max):
    """Radially rescale ``w`` onto the cap if numerical drift pushed it outside."""
    tr = float(np.sum(w * w))
    if tr > w_max:
        return w * math.sqrt(w_max / tr)
    return w


@dataclass
class RbfParams:
    """Hyperparameters shared by every player's network.

    ``centers`` is ``(q, input_dim)``; ``width`` is a scalar or ``(q,)``.
    """

    centers: np.ndarray
    width: object = 5.0 * math.sqrt(2.0)
    w_max: float = 500.0
    beta: float = 100.0
    delta: float = 10.0
    epsilon: float = 0.01
    widths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, float))
        self.widths = np.broadcast_to(np.asarray(self.width, float), (self.q,)).copy()
        for name in ("w_max", "beta", "delta", "epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if np.any(self.widths <= 0):
            raise ValueError("width must be positive")

    @property
    def q(self):
        return self.centers.shape[0]

    @property
    def input_dim(self):
        return self.centers.shape[1]

    @property
    def kappa(self):
        return tanh_kappa()

    @classmethod
    def default(cls, input_dim):
        """11 centers from −2.5 to 2.5 on the input diagonal, width 5√2,
        cap 500, β = 100, δ = 10, ε = 0.01."""
        return cls(diagonal_centers(linspace_centers(-2.5, 2.5, 11), input_dim))

    def network(self, output_dim, weights=None):
        if weights is None:
            weights = np.zeros((self.q, output_dim))
        return RbfNetwork(self.centers, self.widths, weights, self.w_max, self.beta)

    def replace(self, **changes):
        kw = dict(centers=self.centers, width=self.widths, w_max=self.w_max, beta=self.beta,
                  delta=self.delta, epsilon=self.epsilon)
        kw.update(changes)
        return RbfParams(**kw)
