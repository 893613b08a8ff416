import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from mixnash.errors import CapViolated, DimensionMismatch
from mixnash.rbfnn import (RbfNetwork, RbfParams, activation, approximate, damping_phi, diagonal_centers,
                           linspace_centers, project_onto_cap, tanh_kappa, weight_derivative)


def test_kappa_is_lambert_w_of_inverse_e():
    k = tanh_kappa()
    assert k == pytest.approx(scipy.special.lambertw(math.exp(-1)).real, abs=1e-14)
    assert abs(k - math.exp(-(k + 1))) < 1e-14


finite = st.floats(-1e3, 1e3, allow_nan=False)
positive = st.floats(1e-4, 1e2)


@given(finite, positive)
@settings(max_examples=500, deadline=None)
def test_tanh_bound(eta, eps):
    k = tanh_kappa()
    gap = abs(eta) - eta * math.tanh(eta / eps)
    assert -1e-12 <= gap <= k * eps * (1 + 1e-12)


def test_damping_phi_bounded_and_odd(rng):
    e = rng.normal(scale=5, size=100)
    phi = damping_phi(e, 10.0, 0.01)
    assert np.all(np.abs(phi) <= 10.0)
    assert np.allclose(damping_phi(-e, 10.0, 0.01), -phi)
    # slope at zero is κδ²/ε
    h = 1e-9
    assert damping_phi(h, 10.0, 0.01) / h == pytest.approx(tanh_kappa() * 100 / 0.01, rel=1e-6)


def test_activation_formula(rng):
    c = rng.normal(size=(4, 3))
    w = np.array([1.0, 2.0, 0.5, 3.0])
    net = RbfNetwork.zeros(c, w, 2, 10.0, 1.0)
    z = rng.normal(size=3)
    expected = [math.exp(-sum((z[k] - c[j, k]) ** 2 for k in range(3)) / w[j] ** 2) for j in range(4)]
    assert np.allclose(activation(net, z), expected, rtol=1e-14)
    with pytest.raises(DimensionMismatch):
        activation(net, np.zeros(2))


def test_approximate_is_weighted_sum(rng):
    c = rng.normal(size=(5, 2))
    W = rng.normal(size=(5, 3)) * 0.1
    net = RbfNetwork(c, 1.5, W, 10.0, 1.0)
    z = rng.normal(size=2)
    assert np.allclose(approximate(net, z), W.T @ activation(net, z))


def test_default_params():
    p = RbfParams.default(10)
    assert p.q == 11 and p.input_dim == 10
    assert np.allclose(p.centers[:, 0], np.linspace(-2.5, 2.5, 11))
    assert np.allclose(p.centers, p.centers[:, :1])
    assert np.allclose(p.widths, 5 * math.sqrt(2))
    assert (p.w_max, p.beta, p.delta, p.epsilon) == (500.0, 100.0, 10.0, 0.01)
    assert p.replace(beta=7.0).beta == 7.0
    assert np.array_equal(diagonal_centers(linspace_centers(0, 1, 3), 2), [[0, 0], [0.5, 0.5], [1, 1]])


def test_rejects_bad_params():
    with pytest.raises(ValueError):
        RbfParams(np.zeros((2, 2)), width=0.0)
    with pytest.raises(ValueError):
        RbfParams(np.zeros((2, 2)), beta=-1.0)
    with pytest.raises(CapViolated):
        RbfNetwork(np.zeros((2, 1)), 1.0, np.full((2, 1), 10.0), 1.0, 1.0)


def net_on_cap(rng, q=6, d=2, w_max=4.0):
    W = rng.normal(size=(q, d))
    W *= math.sqrt(w_max / np.sum(W * W))
    return RbfNetwork(rng.normal(size=(q, 3)), 1.0, W, w_max, 2.0)


def test_projection_inside_is_plain_gradient(rng):
    net = RbfNetwork(rng.normal(size=(6, 3)), 1.0, 0.01 * rng.normal(size=(6, 2)), 4.0, 2.0)
    s, e = rng.uniform(size=6), rng.normal(size=2)
    assert np.allclose(weight_derivative(net, s, e), 2.0 * np.outer(s, e))


def test_projection_on_cap(rng):
    for _ in range(200):
        net = net_on_cap(rng)
        s, e = rng.uniform(size=6), rng.normal(size=2)
        rate = weight_derivative(net, s, e)
        inner = e @ net.weights.T @ s
        if inner >= 0:
            # tangent: the trace cannot grow to first order
            assert abs(np.sum(net.weights * rate)) < 1e-10
        else:
            assert np.allclose(rate, 2.0 * np.outer(s, e))
            assert np.sum(net.weights * rate) < 0


def test_projection_rejects_state_outside_cap(rng):
    net = net_on_cap(rng)
    net.weights *= 1.01
    with pytest.raises(CapViolated):
        weight_derivative(net, np.ones(6), np.ones(2))


def test_project_onto_cap(rng):
    W = rng.normal(size=(4, 2)) * 10
    P = project_onto_cap(W, 3.0)
    assert np.sum(P * P) == pytest.approx(3.0)
    small = rng.normal(size=(4, 2)) * 0.01
    assert project_onto_cap(small, 3.0) is small


def test_weight_ode_stays_in_cap(rng):
    """Euler-integrate the projected law against adversarial signals; the trace never exceeds the cap."""
    net = RbfNetwork(rng.normal(size=(5, 2)), 1.0, np.zeros((5, 2)), 2.0, 5.0)
    worst = 0.0
    for _ in range(3000):
        s = rng.uniform(size=5)
        e = rng.normal(size=2) + 1.0
        net.weights = project_onto_cap(net.weights + 1e-3 * weight_derivative(net, s, e), net.w_max)
        worst = max(worst, net.weight_norm())
    assert worst <= 2.0 * (1 + 1e-12)
    assert worst > 1.9
