"""The stationary linear model ``u + u_x = f`` on the torus and its shift discretizations.

With ``k = |m|`` the upwinded system is ``(1 + 1/|h|) u_i - (1/|h|) u_{i-k} = f_i``
for either sign of ``h``: it is ``u + delta_h u = f`` when ``h < 0`` and
``u + delta_{-h} u = f`` when ``h > 0``.  The other orientation,
``(1 - 1/|h|) u_i + (1/|h|) u_{i+k} = f_i``, loses diagonal dominance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .adjoint import DiscreteMeasure
from .grid import GridError, GridFunction, PeriodicGrid, ShiftParam, _as_shift, delta
from .initial_data import from_samples

QUAD_TOL = 1e-12
EXACT_FLOOR = 1e-14


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""


class SingularSystem(np.linalg.LinAlgError):
    """The discrete toy system has no unique solution."""


class UpwindingWarning(UserWarning):
    """A toy system was assembled in the non-upwinded orientation."""


@dataclass(frozen=True)
class ToyProblem:
    """Source ``f`` (vectorized, 1-periodic) with a declared bound on ``|f_xx|``."""

    f: Callable = field(repr=False, compare=False)
    fxx_bound: float
    grid: PeriodicGrid

    def __post_init__(self):
        if not math.isfinite(self.fxx_bound) or self.fxx_bound < 0:
            raise ValueError("fxx_bound must be a finite nonnegative number")

    @classmethod
    def from_samples(cls, values, fxx_bound: float) -> ToyProblem:
        vals = np.asarray(values, dtype=float)
        return cls(from_samples(vals).value, fxx_bound, PeriodicGrid(vals.size))

    @classmethod
    def sine(cls, n: int = 128, k: int = 1) -> ToyProblem:
        w = 2.0 * np.pi * k
        return cls(lambda x: np.sin(w * x), w * w, PeriodicGrid(n))

    @classmethod
    def constant(cls, c: float, n: int = 128) -> ToyProblem:
        return cls(lambda x: np.full(np.shape(x), float(c)), 0.0, PeriodicGrid(n))

    def samples(self, grid: PeriodicGrid | None = None) -> np.ndarray:
        g = self.grid if grid is None else grid
        return np.asarray(self.f(g.x), dtype=float) * np.ones(g.n)

    @property
    def sup(self) -> float:
        dense = np.arange(1 << 14) / float(1 << 14)
        return float(np.max(np.abs(self.f(dense))))


def _quad(func, a, b):
    val, err = integrate.quad(func, a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    if not err <= 10 * QUAD_TOL:
        raise QuadratureError(f"quadrature error estimate {err:g} on [{a}, {b}]")
    return val


def exact_solution(prob: ToyProblem, x):
    """``u(x) = e^{-x} u(0) + int_0^x f(s) e^{s-x} ds`` with ``u(0) = int_0^1 f e^s ds / (e - 1)``."""
    f = prob.f

    def g(s):
        return float(f(np.asarray(s))) * math.exp(s)

    u_zero = _quad(g, 0.0, 1.0) / (math.e - 1.0)
    xs = np.mod(np.atleast_1d(np.asarray(x, dtype=float)), 1.0)
    out = np.array([math.exp(-xi) * (u_zero + _quad(g, 0.0, xi)) for xi in xs.ravel()])
    if np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(np.shape(x))


def exact_on_grid(prob: ToyProblem, grid: PeriodicGrid | None = None) -> GridFunction:
    g = prob.grid if grid is None else grid
    return GridFunction(g, exact_solution(prob, g.x))


def system_matrix(s: ShiftParam, upwind: bool = True) -> np.ndarray:
    """Dense cyclic matrix of the toy scheme for shift ``s``."""
    n, k, ah = s.grid.n, abs(s.m), abs(s.h)
    i = np.arange(n)
    B = np.zeros((n, n))
    if upwind:
        B[i, i] = 1.0 + 1.0 / ah
        B[i, (i - k) % n] += -1.0 / ah
    else:
        B[i, i] = 1.0 - 1.0 / ah
        B[i, (i + k) % n] += 1.0 / ah
    return B


@dataclass(frozen=True)
class OrientationReport:
    upwind: bool
    diagonally_dominant: bool
    dominance_margin: float
    condition: float

    def explain(self) -> str:
        if self.diagonally_dominant:
            return "upwinded: strictly diagonally dominant with nonpositive off-diagonals"
        return (
            "non-upwinded: |diagonal| - |off-diagonal| = "
            f"{self.dominance_margin:.3g} < 0; the difference points against the transport "
            "direction and the discrete maximum principle is lost"
        )


def orientation_report(s: ShiftParam, upwind: bool = True) -> OrientationReport:
    B = system_matrix(s, upwind)
    diag = np.abs(np.diag(B))
    off = np.sum(np.abs(B), axis=1) - diag
    margin = float(np.min(diag - off))
    return OrientationReport(upwind, margin > 0, margin, float(np.linalg.cond(B)))


def direct_solve(prob: ToyProblem, s, upwind: bool = True) -> GridFunction:
    """Solve the cyclic toy system on ``prob.grid``.

    ``upwind=False`` assembles the other orientation; it warns, and raises
    :class:`SingularSystem` with the reason when the matrix is singular.
    """
    s = _as_shift(s, prob.grid)
    B = system_matrix(s, upwind)
    if not upwind:
        rep = orientation_report(s, upwind)
        warnings.warn(rep.explain(), UpwindingWarning, stacklevel=2)
        if not np.isfinite(rep.condition) or rep.condition > 1e14:
            raise SingularSystem(f"singular toy system (cond={rep.condition:.3g}); {rep.explain()}")
    try:
        u = np.linalg.solve(B, prob.samples())
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    return GridFunction(prob.grid, u)


@dataclass(frozen=True)
class SeriesSolution:
    u: GridFunction
    terms: int
    tail_bound: float


def series_terms(f_sup: float, h: float, tol: float) -> int:
    """``ceil(log(||f|| / tol) / log(1 - h))`` (at least one term)."""
    if f_sup <= tol:
        return 1
    return max(1, math.ceil(math.log(f_sup / tol) / math.log(1.0 - h)))


def series_solution(prob: ToyProblem, s, tol: float = 1e-12) -> SeriesSolution:
    """Truncated geometric series ``(-h/(1-h)) sum_k (1-h)^{-k} f(x + k h)`` for ``h < 0``."""
    s = _as_shift(s, prob.grid)
    if s.h >= 0:
        raise ValueError("the series representation needs h < 0")
    if tol <= 0:
        raise ValueError("tol must be positive")
    h = s.h
    fv = prob.samples()
    f_sup = float(np.max(np.abs(fv)))
    N = series_terms(f_sup, h, tol)
    r = 1.0 / (1.0 - h)
    acc = np.zeros_like(fv)
    # sum in reverse so the small tail terms are added first
    for k in range(N - 1, -1, -1):
        acc += r**k * np.roll(fv, -k * s.m)
    u = (-h / (1.0 - h)) * acc
    return SeriesSolution(GridFunction(prob.grid, u), N, f_sup * r**N)


def rational_closed_form(prob: ToyProblem, p: int, q: int) -> GridFunction:
    """Finite formula for ``u + delta_h u = f`` with ``h = p/q`` in (0, 1).

    ``u(x) = [-h (1-h)^{q-1} / ((1-h)^q - 1)] sum_{k<q} (1-h)^{-k} f(x + k h)``.
    Requires ``n`` to be a multiple of ``q`` so every ``x + k h`` is a node.
    """
    p, q = int(p), int(q)
    if p <= 0 or q <= 0 or p >= q:
        raise ValueError("need integers 0 < p < q so that h = p/q lies in (0, 1)")
    n = prob.grid.n
    if n % q:
        raise GridError(f"n={n} is not a multiple of q={q}; x + k h would leave the lattice")
    h = p / q
    m = n // q * p
    fv = prob.samples()
    pre = -h * (1.0 - h) ** (q - 1) / ((1.0 - h) ** q - 1.0)
    acc = np.zeros_like(fv)
    for k in range(q):
        acc += (1.0 - h) ** (-k) * np.roll(fv, -k * m)
    return GridFunction(prob.grid, pre * acc)


def stationary_adjoint(x0_node: int, s: ShiftParam) -> DiscreteMeasure:
    """Solve ``B^T sigma = e_{x0}`` for the upwinded matrix ``B`` (``h < 0``).

    Rows of ``B`` sum to one, so ``sigma`` has unit mass; ``B`` is an
    M-matrix, so ``sigma >= 0``.
    """
    if s.h >= 0:
        raise ValueError("the stationary adjoint is defined for h < 0")
    n = s.grid.n
    e = np.zeros(n)
    e[int(x0_node) % n] = 1.0
    sigma = np.linalg.solve(system_matrix(s, True).T, e)
    return DiscreteMeasure(s.grid, sigma)


def stationary_representation(sigma: DiscreteMeasure, g: GridFunction, s: ShiftParam) -> float:
    """``<sigma, g + delta_h g>``, which reproduces ``g(x0)``."""
    return sigma.pair(g + delta(g, s))


@dataclass(frozen=True)
class ToyRateResult:
    hs: np.ndarray
    errors: np.ndarray
    local_rates: np.ndarray
    slope: float
    intercept: float
    exact: bool

    @property
    def ratio_spread(self) -> float:
        """max/min of ``err/|h|``."""
        r = self.errors / np.abs(self.hs)
        return float(np.max(r) / np.min(r))

    def rows(self):
        for h, e, r in zip(self.hs, self.errors, self.local_rates):
            yield float(h), float(e), float(r)


def toy_rate_check(prob: ToyProblem, h_list) -> ToyRateResult:
    """Sup errors of the upwinded discretization against the exact solution on ``prob.grid``."""
    hs = np.asarray(h_list, dtype=float)
    if hs.size < 3:
        raise ValueError("need at least three values of h")
    if np.any(hs >= 0):
        raise ValueError("toy rate check uses negative h")
    n = prob.grid.n
    ms = hs * n
    if np.any(np.abs(ms - np.round(ms)) > 1e-9) or np.any(np.round(ms) == 0):
        raise GridError(f"every h must be a nonzero multiple of 1/{n}")
    exact = exact_on_grid(prob).values
    errors = np.array(
        [float(np.max(np.abs(direct_solve(prob, ShiftParam(int(round(m)), prob.grid)).values - exact))) for m in ms]
    )
    rates = np.full(hs.size, np.nan)
    if np.all(errors <= EXACT_FLOOR * max(1.0, prob.sup)):
        return ToyRateResult(hs, errors, rates, float("nan"), float("nan"), True)
    with np.errstate(divide="ignore", invalid="ignore"):
        rates[1:] = np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])
    slope, intercept = np.polyfit(np.log(np.abs(hs)), np.log(errors), 1)
    return ToyRateResult(hs, errors, rates, float(slope), float(intercept), False)
