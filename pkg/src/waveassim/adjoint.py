"""Sensitivity of the wave model to the boundary stencil coefficients.

Each time level of the forward model adds a tendency that is bilinear in
(coefficients, state): perturbing the boundary coefficients by d_alpha
injects, at every level, a field that is zero except at the controlled
derivative rows, with weights read from the unperturbed trajectory.
``tlm_run`` propagates such a perturbation forward (products of the
perturbations between coefficients and state are dropped, so the map is
linear in d_alpha).  ``adjoint_sweep`` applies the exact transpose of
that linear map: one backward pass that injects the per-level forcing
fields and accumulates their projection onto coefficient space through
the transposed derivative operators and sensitivity rows.  A single
sweep is mathematically identical to summing one backward integration
per forcing level, at a fraction of the cost.

Control vector layout (length 4(J+1)), matching
``BoundaryScheme.to_control_vector``:

    [a_u_0..a_u_J, at_u_J..at_u_0, a_p_0..a_p_J, at_p_J..at_p_0]

where ``a``/``at`` are the left/right stencils.  The descending order of
the right-boundary halves makes each controlled row a contiguous dot
product with the adjacent field values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact import Observations
from .wave import (
    BoundaryScheme,
    GridSpec,
    InteriorStencil,
    Trajectory,
    derivative_matrices,
)

__all__ = [
    "SensitivitySource",
    "adjoint_sweep",
    "control_dim",
    "join_control",
    "misfit_gradient",
    "split_control",
    "time_weights",
    "tlm_run",
]


def control_dim(J: int) -> int:
    return 4 * (J + 1)


def split_control(dalpha: np.ndarray, J: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a control vector into its u and p halves."""
    dalpha = np.asarray(dalpha, dtype=float)
    if dalpha.shape != (control_dim(J),):
        raise ValueError(
            f"control vector must have length {control_dim(J)}, got {dalpha.shape}"
        )
    w = 2 * (J + 1)
    return dalpha[:w], dalpha[w:]


def join_control(vec_u: np.ndarray, vec_p: np.ndarray) -> np.ndarray:
    return np.concatenate([vec_u, vec_p])


def _source_u_rows(p_level: np.ndarray, vec_p: np.ndarray, J: int, h: float) -> np.ndarray:
    """Perturbation tendency on the u-derivative rows for coefficient vector vec_p."""
    N = p_level.size
    out = np.zeros(N - 1)
    out[0] = vec_p[: J + 1] @ p_level[: J + 1] / h
    out[-1] = -(vec_p[J + 1 :] @ p_level[N - 1 - J :]) / h
    return out


def _source_p_rows(u_level: np.ndarray, vec_u: np.ndarray, J: int, h: float) -> np.ndarray:
    """Perturbation tendency on the p-derivative rows for coefficient vector vec_u."""
    N = u_level.size - 1
    out = np.zeros(N)
    out[0] = vec_u[: J + 1] @ u_level[: J + 1] / h
    out[-1] = -(vec_u[J + 1 :] @ u_level[N - J :]) / h
    return out


def _project_p_control(
    p_level: np.ndarray, w_rows: np.ndarray, out: np.ndarray, J: int, h: float, scale: float
) -> None:
    """Transpose of _source_u_rows: fold row adjoints onto the p-coefficient half."""
    N = p_level.size
    out[: J + 1] += (scale * w_rows[0] / h) * p_level[: J + 1]
    out[J + 1 :] -= (scale * w_rows[-1] / h) * p_level[N - 1 - J :]


def _project_u_control(
    u_level: np.ndarray, w_rows: np.ndarray, out: np.ndarray, J: int, h: float, scale: float
) -> None:
    """Transpose of _source_p_rows: fold row adjoints onto the u-coefficient half."""
    N = u_level.size - 1
    out[: J + 1] += (scale * w_rows[0] / h) * u_level[: J + 1]
    out[J + 1 :] -= (scale * w_rows[-1] / h) * u_level[N - J :]


@dataclass(frozen=True)
class SensitivitySource:
    """Controlled-row operators built from one forward state.

    ``apply_*`` maps a coefficient half-vector to the tendency field it
    induces (nonzero only at the first and last derivative rows);
    ``project_*`` is the transpose.
    """

    u_level: np.ndarray
    p_level: np.ndarray
    J: int
    h: float

    def apply_p(self, vec_p: np.ndarray) -> np.ndarray:
        return _source_u_rows(self.p_level, np.asarray(vec_p, float), self.J, self.h)

    def apply_u(self, vec_u: np.ndarray) -> np.ndarray:
        return _source_p_rows(self.u_level, np.asarray(vec_u, float), self.J, self.h)

    def project_p(self, w_rows: np.ndarray) -> np.ndarray:
        out = np.zeros(2 * (self.J + 1))
        _project_p_control(self.p_level, w_rows, out, self.J, self.h, 1.0)
        return out

    def project_u(self, w_rows: np.ndarray) -> np.ndarray:
        out = np.zeros(2 * (self.J + 1))
        _project_u_control(self.u_level, w_rows, out, self.J, self.h, 1.0)
        return out


def tlm_run(
    traj: Trajectory,
    dalpha: np.ndarray,
    stencil: InteriorStencil,
    bs: BoundaryScheme,
    grid: GridSpec,
) -> tuple[np.ndarray, np.ndarray]:
    """Propagate a coefficient perturbation along a stored trajectory.

    The trajectory must come from ``integrate`` with the same (stencil, bs);
    a mismatch is not detectable here.  The perturbation starts from zero
    fields, so the first step reduces to the injected sources.  Returns
    (du, dp) with du of shape (n_steps+1, N+1) (boundary columns stay zero)
    and dp of shape (n_steps+1, N).
    """
    J, h, tau = bs.J, grid.h, grid.tau
    n = traj.n_steps
    if n != grid.n_steps:
        raise ValueError(f"trajectory has {n} steps, grid expects {grid.n_steps}")
    vec_u, vec_p = split_control(dalpha, J)
    D_p, D_u = derivative_matrices(stencil, bs, grid)
    D_u_int = D_u[:, 1:-1]

    du = np.zeros((n + 1, grid.N + 1))
    dp = np.zeros((n + 1, grid.N))

    du_half = 0.5 * tau * _source_u_rows(traj.p[0], vec_p, J, h)
    dp_half = 0.5 * tau * _source_p_rows(traj.u[0], vec_u, J, h)
    du[1, 1:-1] = tau * (D_p @ dp_half + _source_u_rows(traj.p_half, vec_p, J, h))
    dp[1] = tau * (D_u_int @ du_half + _source_p_rows(traj.u_half, vec_u, J, h))

    two_tau = 2.0 * tau
    for t in range(1, n):
        du[t + 1, 1:-1] = du[t - 1, 1:-1] + two_tau * (
            D_p @ dp[t] + _source_u_rows(traj.p[t], vec_p, J, h)
        )
        dp[t + 1] = dp[t - 1] + two_tau * (
            D_u_int @ du[t, 1:-1] + _source_p_rows(traj.u[t], vec_u, J, h)
        )
    return du, dp


def adjoint_sweep(
    traj: Trajectory,
    forcing_u: np.ndarray,
    forcing_p: np.ndarray,
    stencil: InteriorStencil,
    bs: BoundaryScheme,
    grid: GridSpec,
) -> np.ndarray:
    """Fold per-level forcing fields back onto coefficient space.

    Returns the vector g with  <tlm_run(d), (forcing_u, forcing_p)> = <d, g>
    for every control perturbation d, where the left side is the plain
    Euclidean product over all levels and grid points.  forcing_u has shape
    (n_steps+1, N+1) (boundary columns are ignored: the perturbation is
    identically zero there) and forcing_p (n_steps+1, N).  Level 0
    contributes nothing because the perturbation trajectory starts at zero.
    """
    J, h, tau = bs.J, grid.h, grid.tau
    n = traj.n_steps
    if forcing_u.shape != traj.u.shape or forcing_p.shape != traj.p.shape:
        raise ValueError(
            f"forcing shapes {forcing_u.shape}, {forcing_p.shape} do not match "
            f"the trajectory {traj.u.shape}, {traj.p.shape}"
        )
    D_p, D_u = derivative_matrices(stencil, bs, grid)
    DpT = np.ascontiguousarray(D_p.T)
    DuT = np.ascontiguousarray(D_u[:, 1:-1].T)

    au = forcing_u[:, 1:-1].copy()
    ap = forcing_p.copy()
    g_u = np.zeros(2 * (J + 1))
    g_p = np.zeros(2 * (J + 1))

    two_tau = 2.0 * tau
    for t in range(n, 1, -1):
        w = au[t]
        au[t - 2] += w
        ap[t - 1] += two_tau * (DpT @ w)
        _project_p_control(traj.p[t - 1], w, g_p, J, h, two_tau)
        w = ap[t]
        ap[t - 2] += w
        au[t - 1] += two_tau * (DuT @ w)
        _project_u_control(traj.u[t - 1], w, g_u, J, h, two_tau)

    # Transpose of the split first step acting on the level-1 adjoints.
    _project_p_control(traj.p_half, au[1], g_p, J, h, tau)
    _project_u_control(traj.u_half, ap[1], g_u, J, h, tau)
    a_dp_half = tau * (DpT @ au[1])
    a_du_half = tau * (DuT @ ap[1])
    _project_u_control(traj.u[0], a_dp_half, g_u, J, h, 0.5 * tau)
    _project_p_control(traj.p[0], a_du_half, g_p, J, h, 0.5 * tau)
    return join_control(g_u, g_p)


def time_weights(m: int, tau: float) -> np.ndarray:
    """Trapezoid weights for the time integral over levels 0..m."""
    if m < 1:
        raise ValueError(f"need at least one step in the window, got m = {m}")
    w = np.full(m + 1, tau)
    w[0] = w[-1] = 0.5 * tau
    return w


def misfit_gradient(
    traj: Trajectory,
    obs: Observations,
    stencil: InteriorStencil,
    bs: BoundaryScheme,
    grid: GridSpec,
) -> np.ndarray:
    """Gradient of the windowed misfit cost with respect to the control vector.

    The cost is the trapezoid time integral over the trajectory's levels of
    the spatial integral of (u - u_obs)^2 + (p - p_obs)^2, so the adjoint
    forcing at level t is 2 w_t h (misfit fields).  The observations must
    cover at least as many levels as the trajectory stores.
    """
    m = traj.n_steps
    if obs.n_levels < m + 1:
        raise ValueError(
            f"observations cover {obs.n_levels} levels, trajectory needs {m + 1}"
        )
    w = time_weights(m, grid.tau)
    scale = 2.0 * grid.h * w[:, None]
    forcing_u = scale * (traj.u - obs.u[: m + 1])
    forcing_p = scale * (traj.p - obs.p[: m + 1])
    return adjoint_sweep(traj, forcing_u, forcing_p, stencil, bs, grid)
