"""Backward adjoint measures of the linearized scheme, and the diagnostics built on them.

The adjoint step is the exact transpose of the forward Euler linearized step
``v -> (I + dt A^k) v``, so mass and sign are preserved to rounding and the
representation identity telescopes exactly.  Measures are stored as node
weights summing to one, so pairings with grid functions are plain sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .grid import GridError, GridFunction, PeriodicGrid, _as_shift, _check_same_grid
from .hamiltonians import NumericalFlux, UnsupportedOperation
from .initial_data import InitialData
from .solver import (
    CFLViolation,
    InsufficientTrajectory,
    SolverConfig,
    Trajectory,
    _apply,
    coefficients,
    gradient_box,
    solve,
    step_count,
)

MASS_TOL = 1e-12
SIGN_TOL = 1e-14


@dataclass(frozen=True)
class DiscreteMeasure:
    """Nonnegative node weights of unit total mass on a periodic grid."""

    grid: PeriodicGrid
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.grid.n,):
            raise GridError(f"expected {self.grid.n} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("measure weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, grid: PeriodicGrid, x0: float) -> DiscreteMeasure:
        """Unit weight at the node nearest ``x0``."""
        return cls.dirac_at(grid, grid.nearest_node(x0))

    @classmethod
    def dirac_at(cls, grid: PeriodicGrid, node: int) -> DiscreteMeasure:
        w = np.zeros(grid.n)
        w[int(node) % grid.n] = 1.0
        return cls(grid, w)

    @classmethod
    def uniform(cls, grid: PeriodicGrid) -> DiscreteMeasure:
        return cls(grid, np.full(grid.n, 1.0 / grid.n))

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def min_weight(self) -> float:
        return float(np.min(self.weights))

    def is_probability(self, mass_tol: float = MASS_TOL, sign_tol: float = SIGN_TOL) -> bool:
        return abs(self.mass - 1.0) <= mass_tol and self.min_weight >= -sign_tol

    def validate(self) -> DiscreteMeasure:
        if not self.is_probability():
            raise ValueError(f"not a probability measure: mass={self.mass!r}, min={self.min_weight!r}")
        return self

    def pair(self, f) -> float:
        """``sum_i w_i f_i``."""
        vals = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
        return float(np.dot(self.weights, vals))


@dataclass(frozen=True)
class AdjointTrajectory:
    """``weights[k]`` is the measure at forward step ``k`` (``weights[-1]`` is terminal)."""

    forward: Trajectory = field(repr=False)
    terminal: DiscreteMeasure = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def times(self) -> np.ndarray:
        return self.forward.times

    def measure(self, k: int) -> DiscreteMeasure:
        return DiscreteMeasure(self.terminal.grid, self.weights[k])

    @property
    def mass_errors(self) -> np.ndarray:
        return np.abs(np.sum(self.weights, axis=1) - 1.0)

    @property
    def min_weights(self) -> np.ndarray:
        return np.min(self.weights, axis=1)

    def all_probability(self, mass_tol: float = MASS_TOL, sign_tol: float = SIGN_TOL) -> bool:
        return bool(np.all(self.mass_errors <= mass_tol) and np.all(self.min_weights >= -sign_tol))


def linearized_apply(state: GridFunction, F: NumericalFlux, s, v: GridFunction) -> GridFunction:
    """``D_pF delta_h v - D_qF delta_{-h} v`` with coefficients frozen at ``state``."""
    _check_same_grid(state, v)
    s = _as_shift(s, state.grid)
    if s.m <= 0:
        raise GridError("the scheme needs a positive shift")
    a, b = coefficients(state.values, F, s)
    return GridFunction(state.grid, _apply(v.values, a, b, s))


def assemble_stencil(state: GridFunction, F: NumericalFlux, s) -> np.ndarray:
    """Dense matrix of :func:`linearized_apply`, for tests and small grids."""
    s = _as_shift(s, state.grid)
    if s.m <= 0:
        raise GridError("the scheme needs a positive shift")
    n, m, h = state.grid.n, s.m, s.h
    a, b = coefficients(state.values, F, s)
    A = np.zeros((n, n))
    i = np.arange(n)
    np.add.at(A, (i, (i + m) % n), a / h)
    np.add.at(A, (i, (i - m) % n), b / h)
    np.add.at(A, (i, i), -(a + b) / h)
    return A


def _require_adjoint_ready(traj: Trajectory):
    if traj.config.integrator != "euler":
        raise UnsupportedOperation("adjoint propagation is defined for the Euler step only")
    if not traj.every_step:
        raise InsufficientTrajectory("adjoint propagation needs every forward step recorded")


def propagate_adjoint(traj: Trajectory, terminal: DiscreteMeasure) -> AdjointTrajectory:
    """Backward sweep ``sigma^k = (I + dt A^k)^T sigma^{k+1}`` from ``sigma^K = terminal``."""
    _require_adjoint_ready(traj)
    if terminal.grid != traj.grid:
        raise GridError("terminal measure lives on a different grid")
    s, F, dt = traj.shift, traj.flux, traj.dt
    if traj.speed > 0 and dt > s.h / traj.speed * (1.0 + 1e-12):
        raise CFLViolation("the forward step violates the monotone bound; the adjoint would not be a measure")
    K = traj.nsteps
    out = np.empty((K + 1, traj.grid.n))
    sigma = np.array(terminal.weights)
    out[K] = sigma
    for k in range(K - 1, -1, -1):
        a, b = coefficients(traj.states[k], F, s)
        sigma = _backend.stencil_transpose_step(sigma, a, b, s.m, s.h, dt)
        out[k] = sigma
    out.setflags(write=False)
    return AdjointTrajectory(traj, terminal, out)


def _theta_array(adj: AdjointTrajectory, theta) -> np.ndarray:
    traj = adj.forward
    if callable(theta):
        X, Tt = np.meshgrid(traj.grid.x, traj.times)
        theta = theta(X, Tt)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != adj.weights.shape:
        raise GridError(f"theta has shape {theta.shape}, expected {adj.weights.shape}")
    return theta


@dataclass(frozen=True)
class RepresentationCheck:
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def representation_sides(adj: AdjointTrajectory, theta) -> RepresentationCheck:
    """Both sides of ``sum_k dt <sigma^{k+1}, D_t theta^k - A^k theta^k> = <sigma^K, theta^K> - <sigma^0, theta^0>``.

    ``theta`` is a ``(K+1, n)`` array or a callable ``theta(x, t)``.
    """
    th = _theta_array(adj, theta)
    traj = adj.forward
    s, F, dt = traj.shift, traj.flux, traj.dt
    lhs = 0.0
    for k in range(traj.nsteps):
        a, b = coefficients(traj.states[k], F, s)
        defect = th[k + 1] - th[k] - dt * _apply(th[k], a, b, s)
        lhs += float(np.dot(adj.weights[k + 1], defect))
    rhs = float(np.dot(adj.weights[-1], th[-1]) - np.dot(adj.weights[0], th[0]))
    return RepresentationCheck(lhs, rhs)


def representation_residual(adj: AdjointTrajectory, theta) -> float:
    return representation_sides(adj, theta).residual


def _require_gradient(traj: Trajectory):
    if traj.gradient_states is None:
        raise InsufficientTrajectory("gradient_states missing; run evolve_gradient first")


def energy_flux_integral(traj: Trajectory, adj: AdjointTrajectory, h_weighted: bool = True) -> float:
    """``h sum_k dt sum_i [D_pF (delta_h v)^2 + D_qF (delta_{-h} v)^2]_i^k sigma_i^k`` over ``k < K``."""
    _require_gradient(traj)
    if adj.forward is not traj and adj.weights.shape[0] != traj.nsteps + 1:
        raise GridError("adjoint and forward trajectories do not match")
    s, F, dt = traj.shift, traj.flux, traj.dt
    h, m = s.h, s.m
    total = 0.0
    for k in range(traj.nsteps):
        v = traj.gradient_states[k]
        a, b = coefficients(traj.states[k], F, s)
        fv = (np.roll(v, -m) - v) / h
        bv = (v - np.roll(v, m)) / h
        total += dt * float(np.dot(a * fv * fv + b * bv * bv, adj.weights[k]))
    return h * total if h_weighted else total


def compensated_energy(traj: Trajectory) -> float:
    """``h sum_k dt sum_i dx Delta_h u (delta_h v + delta_{-h} v)`` over ``k < K``.

    Defined for the Crandall-Lions flux, whose scheme carries the numerical
    viscosity ``gamma h Delta_h u``.
    """
    if traj.flux.kind != "crandall_lions":
        raise UnsupportedOperation(f"compensated energy is defined for crandall_lions, not {traj.flux.kind}")
    _require_gradient(traj)
    s, dt, g = traj.shift, traj.dt, traj.grid
    h, m = s.h, s.m
    U = traj.states[:-1]
    V = traj.gradient_states[:-1]
    lap = (np.roll(U, -m, axis=1) - 2.0 * U + np.roll(U, m, axis=1)) / (h * h)
    dv = (np.roll(V, -m, axis=1) - np.roll(V, m, axis=1)) / h
    return h * dt * g.dx * float(np.sum(lap * dv))


@dataclass(frozen=True)
class HDerivativeReport:
    """Per-time extrema of the cross-shift difference ``(u^{h+dx} - u^h) / dx``."""

    n: int
    m: int
    h: float
    dx: float
    dt: float
    times: np.ndarray = field(repr=False)
    max_x: np.ndarray = field(repr=False)
    min_x: np.ndarray = field(repr=False)
    c_up: float

    def __post_init__(self):
        if not (np.all(np.isfinite(self.max_x)) and np.all(np.isfinite(self.min_x))):
            raise ValueError("h-derivative estimate is not finite")

    def upper_excess(self, tol: float = 0.0) -> float:
        """``max_t [max_x u_h(t) - C_up t - tol]``."""
        return float(np.max(self.max_x - self.c_up * self.times - tol))

    def lower_constant(self) -> float:
        """Smallest ``C`` with ``sqrt(h) max(0, -min_x u_h(t)) <= C (1 + t)`` at every recorded time."""
        return float(np.max(np.sqrt(self.h) * np.maximum(0.0, -self.min_x) / (1.0 + self.times)))

    def upper_sqrt_constant(self) -> float:
        """Smallest ``C`` with ``sqrt(h) max(0, max_x u_h(t)) <= C (1 + t)``."""
        return float(np.max(np.sqrt(self.h) * np.maximum(0.0, self.max_x) / (1.0 + self.times)))


def h_derivative_estimate(
    u0: InitialData,
    F: NumericalFlux,
    n: int,
    m: int,
    T: float,
    cfl: float = 0.5,
    samples: int = 201,
) -> HDerivativeReport:
    """Estimate ``du^h/dh`` by solving at ``h1 = m dx`` and ``h2 = (m+1) dx`` with one shared time grid.

    The step is chosen for ``h1``, the stricter of the two CFL bounds.
    ``samples`` evenly spaced steps (plus the endpoints) are reported.
    """
    if m < 8:
        raise GridError(f"m={m} is too small for a cross-shift difference; need m >= 8")
    if m + 1 >= n:
        raise GridError("m + 1 must stay below n")
    R = gradient_box(u0)
    speed = F.max_speed(R)
    h1 = m / n
    nsteps = step_count(T, cfl * h1 / speed) if speed > 0 else 1
    record = np.unique(np.round(np.linspace(0, nsteps, samples)).astype(int))
    t1 = solve(u0, F, SolverConfig(n=n, m=m, T=T, cfl=cfl), nsteps=nsteps, record_steps=record)
    t2 = solve(u0, F, SolverConfig(n=n, m=m + 1, T=T, cfl=cfl), nsteps=nsteps, record_steps=record)
    dx = 1.0 / n
    uh = (t2.states - t1.states) / dx
    pa, pq = F.max_partials(R)
    c_up = (pa + pq) * u0.curvature
    return HDerivativeReport(
        n, m, h1, dx, t1.dt, t1.times, np.max(uh, axis=1), np.min(uh, axis=1), float(c_up)
    )
