"""Grid functions on a uniform periodic lattice and their shift difference quotients.

The torus is identified with [0, 1) and sampled at ``n`` nodes ``x_i = i/n``.
Periodicity is carried by index arithmetic modulo ``n``; floating-point
coordinates never decide wraparound.  A shift ``h`` is always an integer
multiple ``m`` of the spacing, so the shifted values ``f(x + h)`` are exact
lattice values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """An argument does not fit the lattice."""


@dataclass(frozen=True)
class PeriodicGrid:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise GridError(f"grid needs an integer node count >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def dx(self) -> float:
        return 1.0 / self.n

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    def shift(self, m: int) -> ShiftParam:
        return ShiftParam(m, self)

    def function(self, values) -> GridFunction:
        return GridFunction(self, values)

    def sample(self, func) -> GridFunction:
        """Evaluate a vectorized callable at the nodes."""
        return GridFunction(self, func(self.x))

    def nearest_node(self, x0: float) -> int:
        """Closest node to ``x0`` on the torus; ties go to the lower index."""
        pos = (x0 % 1.0) * self.n
        lo = int(np.floor(pos))
        frac = pos - lo
        return (lo + 1) % self.n if frac > 0.5 else lo % self.n


@dataclass(frozen=True)
class ShiftParam:
    """Signed shift ``h = m * dx`` on a given grid."""

    m: int
    grid: PeriodicGrid

    def __post_init__(self):
        if int(self.m) != self.m or self.m == 0:
            raise GridError(f"shift multiple must be a nonzero integer, got {self.m!r}")
        if abs(self.m) >= self.grid.n:
            raise GridError(f"|m| must be < n, got m={self.m} with n={self.grid.n}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def h(self) -> float:
        return self.m / self.grid.n

    def __neg__(self) -> ShiftParam:
        return ShiftParam(-self.m, self.grid)


@dataclass(frozen=True)
class GridFunction:
    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise GridError(f"expected {self.grid.n} values, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.grid.n

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def roll(self, k: int) -> GridFunction:
        """Values shifted so that ``result_i = f_{i+k}``."""
        return GridFunction(self.grid, np.roll(self.values, -k))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


def _check_same_grid(*funcs: GridFunction) -> None:
    first = funcs[0].grid
    for f in funcs[1:]:
        if f.grid.n != first.n:
            raise GridError(f"grid mismatch: n={first.n} vs n={f.grid.n}")


def _as_shift(s, grid: PeriodicGrid) -> ShiftParam:
    if isinstance(s, ShiftParam):
        if s.grid.n != grid.n:
            raise GridError(f"shift built for n={s.grid.n} used on n={grid.n}")
        return s
    return ShiftParam(s, grid)


def delta(f: GridFunction, s) -> GridFunction:
    """Forward difference quotient ``(f(x + h) - f(x)) / h`` for signed ``h``."""
    s = _as_shift(s, f.grid)
    v = f.values
    return GridFunction(f.grid, (np.roll(v, -s.m) - v) / s.h)


def second_delta(f: GridFunction, s) -> GridFunction:
    """Centred second difference ``(f(x+h) - 2 f(x) + f(x-h)) / h**2``, ``h > 0``.

    Evaluated as ``delta(delta(f, -h), h)`` so that it agrees bitwise with
    either composition of first differences.
    """
    s = _as_shift(s, f.grid)
    if s.m <= 0:
        raise GridError("second_delta needs a positive shift")
    return delta(delta(f, -s), s)


def integrate(f: GridFunction) -> float:
    """Lattice quadrature of ``f`` over the torus."""
    return float(np.sum(f.values) * f.grid.dx)


def inner(f: GridFunction, g: GridFunction) -> float:
    _check_same_grid(f, g)
    return float(np.dot(f.values, g.values) * f.grid.dx)


@dataclass(frozen=True)
class IdentityReport:
    """Residuals of each finite-difference identity, keyed by name.

    ``residuals`` holds the max absolute nodewise residual.  ``scaled`` divides
    it by ``max(1, largest term magnitude)``; second differences of O(1) data
    are O(1/h**2), so their absolute rounding floor grows like ``eps / h**2``.
    """

    residuals: dict[str, float]
    scaled: dict[str, float]

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    @property
    def max_scaled(self) -> float:
        return max(self.scaled.values())

    def passed(self, tol: float = 1e-12) -> bool:
        return self.max_scaled <= tol


def verify_identities(f: GridFunction, g: GridFunction, s) -> IdentityReport:
    """Evaluate both sides of the shift-calculus identities for ``w=f``, ``v=g``.

    Pointwise identities are checked at every node; the two summation by parts
    formulas compare lattice integrals.
    """
    _check_same_grid(f, g)
    s = _as_shift(s, f.grid)
    pos = s if s.m > 0 else -s
    w, v = f, g
    h = s.h
    dw = delta(w, s)
    dmw = delta(w, -s)
    lap_w = second_delta(w, pos)

    checks = {
        # delta_h w(x - h) = delta_{-h} w(x)
        "shift_back": (dw.roll(-s.m), [dmw]),
        "mixed_second_1": (delta(dw, -s), [lap_w]),
        "mixed_second_2": (delta(dmw, s), [lap_w]),
        # delta_h^2 w(x) = Delta_h w(x + h)
        "double_forward": (delta(dw, s), [lap_w.roll(s.m)]),
        "product_rule": (delta(v * w, s), [v.roll(s.m) * dw, w * delta(v, s)]),
        "square_rule": (delta(w * w, s), [2.0 * w * dw, h * dw * dw]),
        "square_laplacian": (
            second_delta(w * w, pos),
            [2.0 * w * lap_w, dw * dw, dmw * dmw],
        ),
        "by_parts": (
            np.array([inner(w, delta(v, s))]),
            [np.array([-inner(v, dmw)])],
        ),
        "by_parts_second": (
            np.array([inner(delta(v, s), dw)]),
            [np.array([-inner(w, second_delta(v, pos))])],
        ),
    }
    residuals, scaled = {}, {}
    for name, (lhs, terms) in checks.items():
        lhs = np.asarray(lhs)
        terms = [np.asarray(t) for t in terms]
        r = float(np.max(np.abs(lhs - sum(terms))))
        scale = max([1.0, float(np.max(np.abs(lhs)))] + [float(np.max(np.abs(t))) for t in terms])
        if name.startswith("by_parts"):
            # integrals: the summands, not the sums, set the rounding scale
            scale = max(scale, _integrand_scale(name, w, v, s, pos))
        residuals[name] = r
        scaled[name] = r / scale
    return IdentityReport(residuals, scaled)


def _integrand_scale(name, w, v, s, pos) -> float:
    if name == "by_parts":
        return float(np.max(np.abs(w.values * delta(v, s).values)))
    return float(np.max(np.abs(w.values * second_delta(v, pos).values)))
