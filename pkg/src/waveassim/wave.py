"""Staggered-grid discretization of the 1D wave system.

The model integrates

    du/dt = dp/dx,   dp/dt = du/dx,   0 < x < 1,   u(0, t) = u(1, t) = 0,

with u carried at the N+1 cell nodes x_i = i*h and p at the N cell
midpoints x_{i-1/2} = (i - 1/2)*h, h = 1/N (a 1D analogue of a C-type
staggered grid).  Away from the boundaries both first derivatives use a
fixed four-point stencil.  The derivative rows adjacent to the
boundaries (the first and last row of each derivative operator) instead
use free one-sided stencils whose coefficients are the control
variables identified by assimilation; see :class:`BoundaryScheme`.

Time stepping is leapfrog; the first step is split into two forward
Euler half-stages so the start is second-order accurate and does not
excite the odd/even leapfrog mode.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEFAULT_BLOWUP_THRESHOLD",
    "BoundaryScheme",
    "GridSpec",
    "IntegrationDiverged",
    "InteriorStencil",
    "State",
    "Trajectory",
    "derivative_matrices",
    "derivative_p",
    "derivative_u",
    "first_step",
    "fourth_order",
    "integrate",
    "interior_stencil",
    "leapfrog_step",
    "second_order",
]

DEFAULT_BLOWUP_THRESHOLD = 1.0e6

# Offsets j = -1..2 of the interior stencil relative to the output row.
_OFFSETS = np.array([-1.0, 0.0, 1.0, 2.0])


class IntegrationDiverged(RuntimeError):
    """A field amplitude passed the blow-up threshold during integration."""

    def __init__(self, step: int, time: float, amplitude: float):
        super().__init__(
            f"integration diverged at step {step} (t = {time:.6g}): "
            f"max |field| = {amplitude:.3e}"
        )
        self.step = step
        self.time = time
        self.amplitude = amplitude


@dataclass(frozen=True)
class GridSpec:
    """Spatial and temporal resolution of a run.

    Attributes
    ----------
    N : int
        Number of cells; h = 1/N.
    tau : float
        Leapfrog time step.
    n_steps : int
        Number of stored leapfrog levels after level 0 (the split first
        step produces level 1; levels 2..n_steps come from leapfrog).
    """

    N: int
    tau: float
    n_steps: int

    def __post_init__(self):
        if self.N < 4:
            raise ValueError(f"need at least 4 cells, got N = {self.N}")
        if self.tau <= 0.0:
            raise ValueError(f"time step must be positive, got tau = {self.tau}")
        if self.n_steps < 1:
            raise ValueError(f"need at least one step, got n_steps = {self.n_steps}")
        if self.tau > self.h * (1.0 + 1e-12):
            # Unit wave speed: tau/h > 1 is outside the leapfrog stability
            # region for the uniform second-order scheme.  Warn, don't fail:
            # short runs and derivative evaluations are still meaningful.
            warnings.warn(
                f"tau/h = {self.tau * self.N:.3f} exceeds the CFL bound 1",
                stacklevel=2,
            )

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def x_nodes(self) -> np.ndarray:
        """Positions of the u nodes, x_i = i*h."""
        return np.arange(self.N + 1) / self.N

    @property
    def x_half(self) -> np.ndarray:
        """Positions of the p nodes, x_{i-1/2} = (i - 1/2)*h."""
        return (np.arange(self.N) + 0.5) / self.N

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.tau


@dataclass(frozen=True)
class InteriorStencil:
    """Four-point first-derivative stencil applied away from the boundaries.

    The derivative of p at node i is (1/h) * sum_j a[j] p_{i+j-1/2} and the
    derivative of u at half-node i+1/2 is (1/h) * sum_j a[j] u_{i+j}, with
    j = -1..2.  Consistency requires sum a_j = 0 and sum (j - 1/2) a_j = 1.
    """

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.shape != (4,):
            raise ValueError(f"interior stencil needs 4 coefficients, got {a.shape}")
        object.__setattr__(self, "a", a)
        if abs(a.sum()) > 1e-12:
            raise ValueError("stencil does not annihilate constants")
        if abs(((_OFFSETS - 0.5) * a).sum() - 1.0) > 1e-12:
            raise ValueError("stencil is not exact for linear fields")


def second_order() -> InteriorStencil:
    """Centered two-point stencil, second order on the staggered grid."""
    return InteriorStencil(np.array([0.0, -1.0, 1.0, 0.0]))


def fourth_order() -> InteriorStencil:
    """Four-point stencil, fourth order on the staggered grid."""
    return InteriorStencil(np.array([1.0, -27.0, 27.0, -1.0]) / 24.0)


def interior_stencil(order: int) -> InteriorStencil:
    if order == 2:
        return second_order()
    if order == 4:
        return fourth_order()
    raise ValueError(f"interior order must be 2 or 4, got {order}")


@dataclass(frozen=True)
class BoundaryScheme:
    """One-sided derivative stencils at the rows adjacent to the boundaries.

    With J+1 coefficients per stencil the controlled rows are

        (dp/dx)_1       = (1/h) sum_j alpha_p[j] p_{j+1/2}
        (du/dx)_{1/2}   = (1/h) sum_j alpha_u[j] u_j
        (dp/dx)_{N-1}   = -(1/h) sum_j alpha_p_tilde[j] p_{N-j-1/2}
        (du/dx)_{N-1/2} = -(1/h) sum_j alpha_u_tilde[j] u_{N-j}

    so a scheme that is mirror symmetric about x = 1/2 has tilde
    coefficients equal to the plain ones.  All four groups together form
    the 4(J+1)-dimensional control space; `to_control_vector` fixes the
    ordering used throughout (plain groups ascending, tilde groups
    descending, u block before p block).
    """

    alpha_u: np.ndarray
    alpha_p: np.ndarray
    alpha_u_tilde: np.ndarray
    alpha_p_tilde: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("alpha_u", "alpha_p", "alpha_u_tilde", "alpha_p_tilde"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        widths = {arr.shape for arr in arrays.values()}
        if len(widths) != 1 or arrays["alpha_u"].ndim != 1:
            raise ValueError(f"stencil groups must share one width, got {widths}")
        if arrays["alpha_u"].size < 1:
            raise ValueError("boundary stencils need at least one coefficient")

    @property
    def J(self) -> int:
        return self.alpha_u.size - 1

    @classmethod
    def classical(cls, J: int = 1) -> "BoundaryScheme":
        """Plain two-point boundary derivatives, zero-padded to width J+1."""
        if J < 0:
            raise ValueError(f"J must be non-negative, got {J}")
        coeff = np.zeros(J + 1)
        coeff[0] = -1.0
        if J >= 1:
            coeff[1] = 1.0
        else:
            raise ValueError("the classical boundary stencil needs J >= 1")
        return cls(coeff.copy(), coeff.copy(), coeff.copy(), coeff.copy())

    def to_control_vector(self) -> np.ndarray:
        """Flatten the four groups into the canonical control ordering."""
        return np.concatenate(
            [
                self.alpha_u,
                self.alpha_u_tilde[::-1],
                self.alpha_p,
                self.alpha_p_tilde[::-1],
            ]
        )

    @classmethod
    def from_control_vector(cls, x: np.ndarray, J: int) -> "BoundaryScheme":
        x = np.asarray(x, dtype=float)
        w = J + 1
        if x.shape != (4 * w,):
            raise ValueError(f"control vector must have length {4 * w}, got {x.shape}")
        return cls(
            x[:w].copy(),
            x[2 * w : 3 * w].copy(),
            x[w : 2 * w][::-1].copy(),
            x[3 * w :][::-1].copy(),
        )

    def group_sums(self) -> dict[str, float]:
        """Coefficient sum of each group (the order -1 Taylor term)."""
        return {
            "alpha_u": float(self.alpha_u.sum()),
            "alpha_u_tilde": float(self.alpha_u_tilde.sum()),
            "alpha_p": float(self.alpha_p.sum()),
            "alpha_p_tilde": float(self.alpha_p_tilde.sum()),
        }


@dataclass(frozen=True)
class State:
    """u and p fields at one time level."""

    u: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "p", p)
        if u.ndim != 1 or p.ndim != 1 or u.size != p.size + 1:
            raise ValueError(
                f"need u at N+1 nodes and p at N half-nodes, got {u.shape}, {p.shape}"
            )
        if max(abs(u[0]), abs(u[-1])) > 1e-9:
            raise ValueError("u must vanish at both boundaries")


@dataclass(frozen=True)
class Trajectory:
    """States at every leapfrog level plus the split-start half states.

    u has shape (n_steps+1, N+1), p has shape (n_steps+1, N); u_half and
    p_half hold the intermediate fields at t = tau/2 that the split first
    step produces (the sensitivity model needs them).
    """

    u: np.ndarray
    p: np.ndarray
    u_half: np.ndarray
    p_half: np.ndarray
    tau: float

    @property
    def n_steps(self) -> int:
        return self.u.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.u.shape[0]) * self.tau

    def state(self, n: int) -> State:
        return State(self.u[n], self.p[n], n * self.tau)


def _check_widths(bs: BoundaryScheme, grid: GridSpec) -> None:
    if bs.J + 1 > grid.N - 1:
        raise ValueError(
            f"boundary stencil width J+1 = {bs.J + 1} reaches the opposite "
            f"boundary region on an N = {grid.N} grid"
        )


def derivative_p(
    p: np.ndarray, stencil: InteriorStencil, bs: BoundaryScheme, grid: GridSpec
) -> np.ndarray:
    """dp/dx at the interior u nodes i = 1..N-1."""
    p = np.asarray(p, dtype=float)
    N, h, J = grid.N, grid.h, bs.J
    if p.shape != (N,):
        raise ValueError(f"p must have {N} entries, got {p.shape}")
    _check_widths(bs, grid)
    a = stencil.a
    out = np.empty(N - 1)
    out[0] = bs.alpha_p @ p[: J + 1]
    out[1 : N - 2] = a[0] * p[: N - 3] + a[1] * p[1 : N - 2] + a[2] * p[2 : N - 1] + a[3] * p[3:]
    out[N - 2] = -(bs.alpha_p_tilde[::-1] @ p[N - 1 - J :])
    out /= h
    return out


def derivative_u(
    u: np.ndarray, stencil: InteriorStencil, bs: BoundaryScheme, grid: GridSpec
) -> np.ndarray:
    """du/dx at the half nodes i - 1/2, i = 1..N."""
    u = np.asarray(u, dtype=float)
    N, h, J = grid.N, grid.h, bs.J
    if u.shape != (N + 1,):
        raise ValueError(f"u must have {N + 1} entries, got {u.shape}")
    _check_widths(bs, grid)
    a = stencil.a
    out = np.empty(N)
    out[0] = bs.alpha_u @ u[: J + 1]
    out[1 : N - 1] = a[0] * u[: N - 2] + a[1] * u[1 : N - 1] + a[2] * u[2:N] + a[3] * u[3:]
    out[N - 1] = -(bs.alpha_u_tilde[::-1] @ u[N - J :])
    out /= h
    return out


def derivative_matrices(
    stencil: InteriorStencil, bs: BoundaryScheme, grid: GridSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Dense derivative operators (D_p, D_u).

    D_p maps the N p-values to dp/dx at the N-1 interior u nodes; D_u maps
    the N+1 u-values to du/dx at the N half-nodes.  Rows 0 and -1 of each
    carry the boundary stencils, every other row the interior stencil.
    """
    _check_widths(bs, grid)
    N, h, J = grid.N, grid.h, bs.J
    a = stencil.a
    D_p = np.zeros((N - 1, N))
    D_p[0, : J + 1] = bs.alpha_p
    for r in range(1, N - 2):
        D_p[r, r - 1 : r + 3] = a
    D_p[N - 2, N - 1 - J :] = -bs.alpha_p_tilde[::-1]
    D_u = np.zeros((N, N + 1))
    D_u[0, : J + 1] = bs.alpha_u
    for r in range(1, N - 1):
        D_u[r, r - 1 : r + 3] = a
    D_u[N - 1, N - J :] = -bs.alpha_u_tilde[::-1]
    return D_p / h, D_u / h


def first_step(
    ic: State, stencil: InteriorStencil, bs: BoundaryScheme, grid: GridSpec
) -> tuple[State, State]:
    """Split two-stage Euler start; returns the states at tau/2 and tau.

    Both stages only update interior u nodes, so the boundary values of u
    stay at zero throughout.
    """
    tau = grid.tau
    u0 = ic.u.copy()
    u0[0] = u0[-1] = 0.0
    p0 = ic.p

    u_half = u0.copy()
    u_half[1:-1] += 0.5 * tau * derivative_p(p0, stencil, bs, grid)
    p_half = p0 + 0.5 * tau * derivative_u(u0, stencil, bs, grid)

    u1 = u0.copy()
    u1[1:-1] += tau * derivative_p(p_half, stencil, bs, grid)
    p1 = p0 + tau * derivative_u(u_half, stencil, bs, grid)
    return State(u_half, p_half, 0.5 * tau), State(u1, p1, tau)


def leapfrog_step(
    prev: State,
    curr: State,
    stencil: InteriorStencil,
    bs: BoundaryScheme,
    grid: GridSpec,
) -> State:
    """One leapfrog step: level n-1 and n in, level n+1 out."""
    tau = grid.tau
    if abs((curr.t - prev.t) - tau) > 1e-9 * max(1.0, abs(curr.t)):
        raise ValueError(
            f"states must be one step apart: t = {prev.t}, {curr.t}, tau = {tau}"
        )
    u_new = prev.u.copy()
    u_new[1:-1] += 2.0 * tau * derivative_p(curr.p, stencil, bs, grid)
    p_new = prev.p + 2.0 * tau * derivative_u(curr.u, stencil, bs, grid)
    return State(u_new, p_new, curr.t + tau)


def integrate(
    ic: State,
    stencil: InteriorStencil,
    bs: BoundaryScheme,
    grid: GridSpec,
    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
) -> Trajectory:
    """Integrate the model over grid.n_steps leapfrog levels.

    Raises
    ------
    IntegrationDiverged
        If max(|u|, |p|) exceeds ``blowup_threshold`` (or turns non-finite)
        at any level.  Unstable boundary schemes reached during a
        minimization line search end up here.
    """
    D_p, D_u = derivative_matrices(stencil, bs, grid)
    N, tau, n = grid.N, grid.tau, grid.n_steps

    U = np.zeros((n + 1, N + 1))
    P = np.zeros((n + 1, N))
    U[0] = ic.u
    U[0, 0] = U[0, -1] = 0.0
    P[0] = ic.p

    u_half = U[0].copy()
    u_half[1:-1] += 0.5 * tau * (D_p @ P[0])
    p_half = P[0] + 0.5 * tau * (D_u @ U[0])
    U[1] = U[0]
    U[1, 1:-1] += tau * (D_p @ p_half)
    P[1] = P[0] + tau * (D_u @ u_half)

    def _check(level: int) -> None:
        amp = max(np.abs(U[level]).max(), np.abs(P[level]).max())
        if not amp <= blowup_threshold:  # also catches NaN
            raise IntegrationDiverged(level, level * tau, amp)

    _check(1)
    two_tau = 2.0 * tau
    for t in range(1, n):
        U[t + 1] = U[t - 1]
        U[t + 1, 1:-1] += two_tau * (D_p @ P[t])
        P[t + 1] = P[t - 1] + two_tau * (D_u @ U[t])
        _check(t + 1)
    return Trajectory(U, P, u_half, p_half, tau)
