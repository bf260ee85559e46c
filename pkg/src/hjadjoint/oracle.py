"""Exact viscosity solutions for convex ``H`` via the Hopf-Lax formula.

``u(x, t) = min_y [u0(y) + t L((x - y) / t)]`` with ``L`` the Legendre
transform of ``H``.  Minimization is a coarse lattice scan over a window
bounded by the finite propagation speed, followed by golden-section
refinement of the best local minima.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._optim import golden_minimize
from .grid import GridError, GridFunction, PeriodicGrid, _check_same_grid
from .hamiltonians import Hamiltonian, NumericalFlux, legendre
from .initial_data import InitialData
from .solver import SolverConfig, gradient_box, solve, step_count


@dataclass
class ExactSolution:
    """Hopf-Lax evaluator for ``u0`` and a convex Hamiltonian.

    ``min_scan`` is the minimum number of coarse points across a window.
    """

    u0: InitialData
    hamiltonian: Hamiltonian
    min_scan: int = 10_000
    tol: float = 1e-10
    margin: float = 1.0
    _table: dict = field(default_factory=dict, repr=False)

    @property
    def speed(self) -> float:
        """``max |H'|`` over the a priori gradient range ``|p| <= ||(u0)_x|| + margin``."""
        R = self.u0.lip + self.margin
        p = np.linspace(-R, R, 20001)
        return float(np.max(np.abs(self.hamiltonian.derivative(p))))

    def half_width(self, t: float) -> float:
        return t * self.speed + 1.0

    def __call__(self, x, t: float):
        return hopf_lax(self, x, t)

    # Legendre transform support for non-quadratic H
    def _p_range(self, qmax: float) -> float:
        H = self.hamiltonian
        P = 1.0
        while H.derivative(P) <= qmax or H.derivative(-P) >= -qmax:
            P *= 2.0
            if P > 1e8:
                raise ValueError("Hamiltonian is not coercive enough to bracket the Legendre maximizer")
        return 1.1 * P

    def lagrangian(self, q):
        q = np.asarray(q, dtype=float)
        if self.hamiltonian.kind == "quadratic":
            return 0.5 * q * q
        P = self._p_range(float(np.max(np.abs(q))) if q.size else 1.0)
        return legendre(self.hamiltonian, q, -P, P, samples=4001)

    def _lagrangian_table(self, qmax: float):
        key = round(qmax, 6)
        if key not in self._table:
            qs = np.linspace(-qmax, qmax, 40001)
            self._table[key] = (qs, self.lagrangian(qs))
        return self._table[key]


def _coarse_generic(sol: ExactSolution, xs, t, W, N):
    """Numpy coarse scan for tabulated Lagrangians; same contract as the quadratic kernel."""
    qs, Ls = sol._lagrangian_table(W / t + 1.0)
    samples = sol.u0(np.arange(N) / N)
    best = np.full((xs.size, 2), np.nan)
    for k, x in enumerate(xs):
        j = np.arange(int(np.ceil((x - W) * N)), int(np.floor((x + W) * N)) + 1)
        y = j / N
        vals = samples[np.mod(j, N)] + t * np.interp((x - y) / t, qs, Ls)
        inner = np.zeros(vals.size, dtype=bool)
        inner[1:-1] = (vals[1:-1] <= vals[:-2]) & (vals[1:-1] <= vals[2:])
        cand = np.flatnonzero(inner)
        if cand.size == 0:
            cand = np.array([int(np.argmin(vals))])
        order = cand[np.argsort(vals[cand], kind="stable")[:2]]
        best[k, : order.size] = y[order]
    return best


def hopf_lax(sol: ExactSolution, x, t: float):
    """Evaluate the viscosity solution at points ``x`` and time ``t >= 0``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xs = np.atleast_1d(x).ravel()
    if t == 0:
        out = sol.u0(xs)
        return float(out[0]) if scalar else out.reshape(x.shape)
    W = sol.half_width(t)
    N = max(int(np.ceil(sol.min_scan / (2.0 * W))), 2048)
    if sol.hamiltonian.kind == "quadratic":
        samples = np.ascontiguousarray(sol.u0(np.arange(N) / N), dtype=float)
        cands = _backend.hopf_lax_scan_quadratic(samples, xs, t, W)
    else:
        cands = _coarse_generic(sol, xs, t, W, N)
    step = 1.0 / N

    def objective(xq):
        def f(y):
            return sol.u0(y) + t * sol.lagrangian((xq - y) / t)

        return f

    best = np.full(xs.size, np.inf)
    for c in range(2):
        y0 = cands[:, c]
        ok = np.isfinite(y0)
        if not np.any(ok):
            continue
        _, val = golden_minimize(objective(xs[ok]), y0[ok] - step, y0[ok] + step, tol=sol.tol)
        best[ok] = np.minimum(best[ok], val)
    return float(best[0]) if scalar else best.reshape(x.shape)


def exact_on_grid(sol: ExactSolution, grid: PeriodicGrid, t: float) -> GridFunction:
    return GridFunction(grid, hopf_lax(sol, grid.x, t))


def fine_reference(u0: InitialData, F: NumericalFlux, T: float, n_ref: int, n_study: int,
                   cfl: float = 0.5, times=None):
    """Run the scheme with ``h_ref = 1/n_ref`` and subsample onto the study grid.

    Returns the final-time :class:`GridFunction`, or one per entry of
    ``times`` taken at the nearest reference step.
    """
    if n_ref % n_study:
        raise GridError(f"reference grid n={n_ref} is not a refinement of n={n_study}")
    if n_ref < 8 * n_study:
        raise GridError("reference shift must be at least 8x finer than the study shift")
    k = n_ref // n_study
    config = SolverConfig(n=n_ref, m=1, T=T, cfl=cfl)
    R = gradient_box(u0, config.box_margin)
    nsteps = step_count(T, cfl * (1.0 / n_ref) / F.max_speed(R))
    wanted = [] if times is None else [int(round(tt / (T / nsteps))) for tt in times]
    traj = solve(u0, F, config, nsteps=nsteps, record_steps=wanted)
    study = PeriodicGrid(n_study)
    if times is None:
        return GridFunction(study, traj.states[-1][::k])
    rows = {int(st): j for j, st in enumerate(traj.steps)}
    return [GridFunction(study, traj.states[rows[min(max(w, 0), nsteps)]][::k]) for w in wanted]


def sup_distance(a: GridFunction, b: GridFunction) -> float:
    _check_same_grid(a, b)
    return float(np.max(np.abs(a.values - b.values)))
