"""Shared builders and independent oracle helpers for the test suite.

The naive_* helpers re-implement the discrete operators with explicit
index loops straight from their definitions; they stay deliberately
separate from the vectorized library code so the two can check each
other.
"""

import numpy as np
import pytest

from waveassim.exact import ModeSpec, Observations, sample_observations
from waveassim.wave import BoundaryScheme, GridSpec, State, interior_stencil


def make_setup(k=3, N=30, tau=1.0 / 120.0, n_steps=720, order=2, J=1):
    """Grid, stencil, classical scheme, observations, and start state for mode k."""
    grid = GridSpec(N, tau, n_steps)
    stencil = interior_stencil(order)
    bs = BoundaryScheme.classical(J)
    modes = (ModeSpec(k, 1.0, 1.0),)
    obs = sample_observations(modes, grid)
    ic = State(obs.u[0].copy(), obs.p[0].copy(), 0.0)
    return grid, stencil, bs, modes, obs, ic


def observations_from_trajectory(traj, grid) -> Observations:
    """Wrap a model trajectory as observations (perfect-twin construction)."""
    return Observations(grid, traj.times, traj.u.copy(), traj.p.copy())


def naive_derivative_p(p, a, alpha_p, alpha_p_tilde, N, h):
    """Loop implementation of dp/dx at interior nodes, straight from the row definitions."""
    J = len(alpha_p) - 1
    out = np.zeros(N - 1)
    out[0] = sum(alpha_p[j] * p[j] for j in range(J + 1)) / h
    for i in range(2, N - 1):
        out[i - 1] = sum(a[j + 1] * p[i + j - 1] for j in range(-1, 3)) / h
    out[N - 2] = -sum(alpha_p_tilde[j] * p[N - 1 - j] for j in range(J + 1)) / h
    return out


def naive_derivative_u(u, a, alpha_u, alpha_u_tilde, N, h):
    """Loop implementation of du/dx at the half nodes."""
    J = len(alpha_u) - 1
    out = np.zeros(N)
    out[0] = sum(alpha_u[j] * u[j] for j in range(J + 1)) / h
    for i in range(1, N - 1):
        out[i] = sum(a[j + 1] * u[i + j] for j in range(-1, 3)) / h
    out[N - 1] = -sum(alpha_u_tilde[j] * u[N - j] for j in range(J + 1)) / h
    return out


def naive_first_step(u0, p0, a, bs, N, h, tau):
    """Two-stage Euler start written longhand."""
    du0 = naive_derivative_p(p0, a, bs.alpha_p, bs.alpha_p_tilde, N, h)
    dp0 = naive_derivative_u(u0, a, bs.alpha_u, bs.alpha_u_tilde, N, h)
    u_half = u0.copy()
    u_half[1:-1] = u0[1:-1] + 0.5 * tau * du0
    p_half = p0 + 0.5 * tau * dp0
    du_half = naive_derivative_p(p_half, a, bs.alpha_p, bs.alpha_p_tilde, N, h)
    dp_half = naive_derivative_u(u_half, a, bs.alpha_u, bs.alpha_u_tilde, N, h)
    u1 = u0.copy()
    u1[1:-1] = u0[1:-1] + tau * du_half
    p1 = p0 + tau * dp_half
    return (u_half, p_half), (u1, p1)


def phase_fit_speed(traj, k, N):
    """Measured phase speed of mode k from a trajectory.

    Projects u onto sin(k pi x) and p onto cos(k pi x), unwraps the phase of
    the rotating pair, and fits its slope; returns the speed ratio (angular
    rate divided by k pi).  Independent of the dispersion formulas.
    """
    x_nodes = np.arange(N + 1) / N
    x_half = (np.arange(N) + 0.5) / N
    s = np.sin(k * np.pi * x_nodes)
    c = np.cos(k * np.pi * x_half)
    f = traj.u @ s / (s @ s)
    g = traj.p @ c / (c @ c)
    theta = np.unwrap(np.arctan2(-f, g))
    rate = np.polyfit(traj.times, theta, 1)[0]
    return abs(rate) / (k * np.pi)


@pytest.fixture
def k3_small():
    """Small, fast k = 3 window setup shared by adjoint/objective tests."""
    return make_setup(k=3, N=30, tau=1.0 / 120.0, n_steps=240, order=2, J=1)
