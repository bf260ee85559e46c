"""Time integration of ``u_t + F(-delta_h u, delta_{-h} u) = 0`` on the lattice.

Also evolves the exact lattice derivatives ``v = u_x`` and ``s = u_xx`` of the
scheme through its linearization, and checks the a priori bounds that the
monotone structure guarantees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from .grid import GridError, GridFunction, PeriodicGrid, ShiftParam, _as_shift, delta
from .hamiltonians import NumericalFlux
from .initial_data import InitialData

INTEGRATORS = ("euler", "rk4")
MAX_STEPS = 50_000_000


class CFLViolation(ValueError):
    """Time step exceeds the monotone step bound."""


class InsufficientTrajectory(ValueError):
    """A derived computation needs forward states that were not recorded."""


@dataclass(frozen=True)
class SolverConfig:
    n: int
    m: int = 1
    T: float = 1.0
    cfl: float = 0.5
    integrator: str = "euler"
    stride: int = 1
    box_margin: float = 1.0

    def __post_init__(self):
        if not 0 < self.m < self.n:
            raise GridError(f"need 0 < m < n, got m={self.m}, n={self.n}")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.cfl <= 0:
            raise ValueError("cfl must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def h(self) -> float:
        return self.m / self.n


def _readonly(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trajectory:
    """Recorded forward states.

    ``states[j]`` is the lattice state at ``times[j] = steps[j] * dt``.
    """

    config: SolverConfig
    flux: NumericalFlux
    u0: InitialData
    dt: float
    nsteps: int
    steps: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    gradient_states: np.ndarray | None = field(default=None, repr=False)
    second_states: np.ndarray | None = field(default=None, repr=False)
    speed: float = 0.0

    @property
    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.config.n)

    @property
    def shift(self) -> ShiftParam:
        return ShiftParam(self.config.m, self.grid)

    @property
    def h(self) -> float:
        return self.config.h

    @property
    def every_step(self) -> bool:
        return self.steps.size == self.nsteps + 1

    def state(self, j: int = -1) -> GridFunction:
        return GridFunction(self.grid, self.states[j])

    @property
    def final(self) -> GridFunction:
        return self.state(-1)


def gradient_box(u0: InitialData, margin: float = 1.0) -> float:
    """Radius of the box containing every difference quotient of the solution."""
    return u0.lip + margin


def rhs(u: GridFunction, F: NumericalFlux, s) -> GridFunction:
    """``-F(-delta_h u, delta_{-h} u)`` nodewise."""
    s = _as_shift(s, u.grid)
    if s.m <= 0:
        raise GridError("the scheme needs a positive shift")
    return GridFunction(u.grid, _rhs(u.values, F, s))


def _rhs(u: np.ndarray, F: NumericalFlux, s: ShiftParam) -> np.ndarray:
    g = s.grid
    p = -delta(GridFunction(g, u), s).values
    q = delta(GridFunction(g, u), -s).values
    return -F.value(p, q)


def _step_values(u: np.ndarray, F: NumericalFlux, s: ShiftParam, dt: float, integrator: str, nsteps: int = 1):
    if integrator == "euler":
        if F.kind == "upwind_quadratic":
            return _backend.upwind_euler_steps(u, s.m, s.h, dt, nsteps)
        if F.kind == "crandall_lions" and F.hamiltonian.kind == "quadratic":
            return _backend.crandall_lions_quadratic_euler_steps(u, s.m, s.h, dt, F.gamma, nsteps)
        for _ in range(nsteps):
            u = u + dt * _rhs(u, F, s)
        return u
    for _ in range(nsteps):
        k1 = _rhs(u, F, s)
        k2 = _rhs(u + 0.5 * dt * k1, F, s)
        k3 = _rhs(u + 0.5 * dt * k2, F, s)
        k4 = _rhs(u + dt * k3, F, s)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return u


def max_stable_dt(F: NumericalFlux, s: ShiftParam, R: float) -> float:
    """``h / sup_box (D_p F + D_q F)`` on ``|p|, |q| <= R``."""
    speed = F.max_speed(R)
    return math.inf if speed <= 0 else s.h / speed


def advance(u: GridFunction, F: NumericalFlux, s, dt: float, integrator: str = "euler", R: float | None = None) -> GridFunction:
    """One time step; raises :class:`CFLViolation` above the monotone step bound.

    With ``R`` the bound is ``h / sup(D_p F + D_q F)`` over the box ``|p|, |q| <= R``;
    without it, the sup is taken over the coefficients at ``u`` itself.
    """
    s = _as_shift(s, u.grid)
    if s.m <= 0:
        raise GridError("the scheme needs a positive shift")
    if integrator not in INTEGRATORS:
        raise ValueError(f"integrator must be one of {INTEGRATORS}")
    if R is None:
        a, b = coefficients(u.values, F, s)
        speed = float(np.max(a + b))
        bound = math.inf if speed <= 0 else s.h / speed
    else:
        bound = max_stable_dt(F, s, R)
    if dt > bound * (1.0 + 1e-12):
        raise CFLViolation(f"dt={dt:g} exceeds the monotone step bound {bound:g}")
    return GridFunction(u.grid, _step_values(u.values, F, s, dt, integrator))


def step_count(T: float, dt_max: float) -> int:
    """Smallest step count whose uniform step divides ``T`` and respects ``dt_max``."""
    if math.isinf(dt_max):
        return 1
    k = math.ceil(T / dt_max * (1.0 - 1e-14))
    if k > MAX_STEPS:
        raise CFLViolation(f"{k} steps exceed the limit of {MAX_STEPS}")
    return max(k, 1)


def solve(
    u0: InitialData,
    F: NumericalFlux,
    config: SolverConfig,
    nsteps: int | None = None,
    check_cfl: bool = True,
    record_steps=None,
) -> Trajectory:
    """Integrate from ``u0`` to ``config.T``.

    The uniform step is ``T / K`` with the smallest ``K`` meeting
    ``dt <= cfl * h / sup_box(D_p F + D_q F)``.  Passing ``nsteps`` fixes
    ``K`` instead (it must still satisfy the bound unless ``check_cfl`` is
    false, which exists for instability experiments).  ``record_steps``
    overrides the stride with an explicit list of step indices to keep.
    """
    grid = PeriodicGrid(config.n)
    s = ShiftParam(config.m, grid)
    R = gradient_box(u0, config.box_margin)
    speed = F.max_speed(R)
    dt_max = config.cfl * s.h / speed if speed > 0 else math.inf
    if nsteps is None:
        nsteps = step_count(config.T, dt_max)
    dt = config.T / nsteps
    bound = min(dt_max, s.h / speed if speed > 0 else math.inf)
    if check_cfl and dt > bound * (1.0 + 1e-12):
        raise CFLViolation(f"dt={dt:g} exceeds the monotone step bound {bound:g}")
    if record_steps is None:
        record = list(range(0, nsteps + 1, config.stride))
    else:
        record = sorted({0, nsteps, *(int(k) for k in record_steps if 0 <= k <= nsteps)})
    if record[-1] != nsteps:
        record.append(nsteps)
    u = np.asarray(u0(grid.x), dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("initial data is not finite")
    states = np.empty((len(record), grid.n))
    states[0] = u
    for j in range(1, len(record)):
        u = _step_values(u, F, s, dt, config.integrator, record[j] - record[j - 1])
        states[j] = u
    steps = np.array(record)
    return Trajectory(
        config, F, u0, dt, nsteps, _readonly(steps), _readonly(steps * dt), _readonly(states), speed=speed
    )


def coefficients(u: np.ndarray, F: NumericalFlux, s: ShiftParam):
    """Linearization weights ``(D_p F, D_q F)`` at ``(-delta_h u, delta_{-h} u)``."""
    g = s.grid
    p = -delta(GridFunction(g, u), s).values
    q = delta(GridFunction(g, u), -s).values
    a, b = F.grad(p, q)
    return np.asarray(a, dtype=float), np.asarray(b, dtype=float)


def _apply(v, a, b, s):
    h = s.h
    return a * ((np.roll(v, -s.m) - v) / h) - b * ((v - np.roll(v, s.m)) / h)


def _second_source(v, u, F, s):
    g = s.grid
    p = -delta(GridFunction(g, u), s).values
    q = delta(GridFunction(g, u), -s).values
    dpp, dpq, dqq = F.hessian(p, q)
    fv = (np.roll(v, -s.m) - v) / s.h
    bv = (v - np.roll(v, s.m)) / s.h
    return dpp * fv * fv + dqq * bv * bv + 2.0 * dpq * (-fv) * bv


def _require_every_step(traj: Trajectory):
    if not traj.every_step:
        raise InsufficientTrajectory("derivative evolution needs every forward step recorded (stride=1)")


def evolve_gradient(traj: Trajectory) -> Trajectory:
    """Fill ``gradient_states`` by evolving ``v_t = D_pF delta_h v - D_qF delta_{-h} v``.

    With Euler stepping each update is the x-derivative of the forward step,
    so ``v`` is the exact derivative of the fully discrete solution.
    """
    _require_every_step(traj)
    s, F, dt = traj.shift, traj.flux, traj.dt
    v = np.asarray(traj.u0.dx(traj.grid.x), dtype=float)
    out = np.empty_like(traj.states)
    out[0] = v
    if traj.config.integrator == "euler":
        for k in range(traj.nsteps):
            a, b = coefficients(traj.states[k], F, s)
            v = _backend.stencil_step(v, a, b, s.m, s.h, dt)
            out[k + 1] = v
    else:
        for k in range(traj.nsteps):
            u = traj.states[k]

            def f(uu, vv):
                a, b = coefficients(uu, F, s)
                return _rhs(uu, F, s), _apply(vv, a, b, s)

            ku1, kv1 = f(u, v)
            ku2, kv2 = f(u + 0.5 * dt * ku1, v + 0.5 * dt * kv1)
            ku3, kv3 = f(u + 0.5 * dt * ku2, v + 0.5 * dt * kv2)
            _, kv4 = f(u + dt * ku3, v + dt * kv3)
            v = v + (dt / 6.0) * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4)
            out[k + 1] = v
    return replace(traj, gradient_states=_readonly(out))


def evolve_second(traj: Trajectory) -> Trajectory:
    """Fill ``second_states`` with ``s = u_xx`` of the scheme.

    Needs a flux with second derivatives; the quadratic form in the source
    term is nonnegative for convex ``F``.
    """
    _require_every_step(traj)
    F = traj.flux
    if not F.has_hessian:
        from .hamiltonians import UnsupportedOperation

        raise UnsupportedOperation(f"{F.label} has no second derivatives")
    if traj.gradient_states is None:
        traj = evolve_gradient(traj)
    sh, dt = traj.shift, traj.dt
    w = np.asarray(traj.u0.dxx(traj.grid.x), dtype=float)
    out = np.empty_like(traj.states)
    out[0] = w
    if traj.config.integrator == "euler":
        for k in range(traj.nsteps):
            u = traj.states[k]
            a, b = coefficients(u, F, sh)
            w = _backend.stencil_step(w, a, b, sh.m, sh.h, dt) - dt * _second_source(traj.gradient_states[k], u, F, sh)
            out[k + 1] = w
    else:
        for k in range(traj.nsteps):
            u, v = traj.states[k], traj.gradient_states[k]

            def f(uu, vv, ww):
                a, b = coefficients(uu, F, sh)
                return (
                    _rhs(uu, F, sh),
                    _apply(vv, a, b, sh),
                    _apply(ww, a, b, sh) - _second_source(vv, uu, F, sh),
                )

            k1 = f(u, v, w)
            k2 = f(*(x + 0.5 * dt * kx for x, kx in zip((u, v, w), k1)))
            k3 = f(*(x + 0.5 * dt * kx for x, kx in zip((u, v, w), k2)))
            k4 = f(*(x + dt * kx for x, kx in zip((u, v, w), k3)))
            w = w + (dt / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            out[k + 1] = w
    return replace(traj, second_states=_readonly(out))


@dataclass(frozen=True)
class MonitorReport:
    """Excess of each monitored quantity over its a priori bound (``<= 0`` means satisfied).

    ``series`` maps each monitor name to its per-recorded-time excess.
    """

    times: np.ndarray = field(repr=False)
    series: dict = field(repr=False)

    @property
    def sup_bound_max(self) -> float:
        return float(np.max(self.series["sup"]))

    @property
    def lipschitz_max(self) -> float:
        return float(max(np.max(self.series[k]) for k in ("lip_delta", "lip_gradient") if k in self.series))

    @property
    def one_sided_second_max(self) -> float:
        keys = [k for k in ("forward_gap", "backward_gap", "lower_gap", "curvature") if k in self.series]
        return float(max(np.max(self.series[k]) for k in keys))

    def maxima(self) -> dict:
        return {k: float(np.max(v)) for k, v in self.series.items()}


def monitor_bounds(traj: Trajectory) -> MonitorReport:
    """Evaluate the a priori bounds at every recorded time.

    * ``sup``: ``||u(t)|| - (||u0|| + |F(0,0)| t)``
    * ``lip_delta``: ``max ||delta_{±h} u(t)|| - ||(u0)_x||``
    * ``lip_gradient``: ``||u_x(t)|| - ||(u0)_x||``
    * ``forward_gap``: ``max(u_x(x+h) - delta_h u) - h ||(u0)_xx||``
    * ``backward_gap``: ``max(delta_{-h} u - u_x(x-h)) - h ||(u0)_xx||``
    * ``lower_gap``: ``max(delta_h u - u_x) - h ||(u0)_xx||``
    * ``curvature``: ``max u_xx(t) - ||(u0)_xx||`` (when ``u_xx`` was evolved)

    The gradient-based monitors evolve ``u_x`` first when the trajectory has
    every step recorded.
    """
    if traj.gradient_states is None and traj.every_step:
        traj = evolve_gradient(traj)
    s = traj.shift
    h, m = s.h, s.m
    U = traj.states
    fwd = (np.roll(U, -m, axis=1) - U) / h
    bwd = (U - np.roll(U, m, axis=1)) / h
    f00 = abs(float(traj.flux.value(0.0, 0.0)))
    series = {
        "sup": np.max(np.abs(U), axis=1) - (traj.u0.sup + f00 * traj.times),
        "lip_delta": np.maximum(np.max(np.abs(fwd), axis=1), np.max(np.abs(bwd), axis=1)) - traj.u0.lip,
    }
    curv = traj.u0.curvature
    if traj.gradient_states is not None:
        V = traj.gradient_states
        series["lip_gradient"] = np.max(np.abs(V), axis=1) - traj.u0.lip
        series["forward_gap"] = np.max(np.roll(V, -m, axis=1) - fwd, axis=1) - h * curv
        series["backward_gap"] = np.max(bwd - np.roll(V, m, axis=1), axis=1) - h * curv
        series["lower_gap"] = np.max(fwd - V, axis=1) - h * curv
    if traj.second_states is not None:
        series["curvature"] = np.max(traj.second_states, axis=1) - curv
    return MonitorReport(traj.times, series)
