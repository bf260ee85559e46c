"""Convex Hamiltonians and monotone two-argument numerical Hamiltonians.

A :class:`NumericalFlux` ``F(p, q)`` is used by the scheme as
``u_t + F(-delta_h u, delta_{-h} u) = 0``.  Every shipped construction is
nondecreasing in each argument on its validity box and consistent in the
sense ``F(-p, p) = H(p)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._optim import golden_minimize


class UnsupportedOperation(RuntimeError):
    """The selected flux or Hamiltonian does not provide the requested quantity."""


class RangeTooSmall(ValueError):
    """A maximizer was attained at the end of the search interval."""


@dataclass(frozen=True)
class Hamiltonian:
    """Smooth convex coercive ``H(p)``.

    Use :meth:`quadratic`, :meth:`power_even` or :meth:`tabulated` rather than
    the raw constructor.
    """

    kind: str
    a: int = 2
    _value: Callable | None = field(default=None, repr=False, compare=False)
    _deriv: Callable | None = field(default=None, repr=False, compare=False)
    _second: Callable | None = field(default=None, repr=False, compare=False)
    label: str = ""

    @classmethod
    def quadratic(cls) -> Hamiltonian:
        return cls("quadratic", 2, label="quadratic")

    @classmethod
    def power_even(cls, a: int) -> Hamiltonian:
        """``H(p) = p**a / a`` for even ``a >= 2``."""
        if int(a) != a or a < 2 or a % 2:
            raise ValueError(f"power must be an even integer >= 2, got {a!r}")
        return cls("power", int(a), label=f"power{int(a)}")

    @classmethod
    def tabulated(cls, value, derivative, second=None, label="tabulated") -> Hamiltonian:
        """Wrap user evaluators; ``second`` is optional."""
        return cls("tabulated", 0, value, derivative, second, label)

    def __call__(self, p):
        return self.value(p)

    def value(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "quadratic":
            return 0.5 * p * p
        if self.kind == "power":
            return p**self.a / self.a
        return np.asarray(self._value(p), dtype=float)

    def derivative(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "quadratic":
            return p.copy()
        if self.kind == "power":
            return p ** (self.a - 1)
        return np.asarray(self._deriv(p), dtype=float)

    @property
    def has_second(self) -> bool:
        return self.kind != "tabulated" or self._second is not None

    def second(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "quadratic":
            return np.ones_like(p)
        if self.kind == "power":
            return (self.a - 1) * p ** (self.a - 2)
        if self._second is None:
            raise UnsupportedOperation(f"{self.label} has no second derivative evaluator")
        return np.asarray(self._second(p), dtype=float)

    def argmin(self, radius: float = 10.0) -> float:
        """Location of ``min H``; zero for the closed-form kinds."""
        if self.kind != "tabulated":
            return 0.0
        grid = np.linspace(-radius, radius, 4001)
        k = int(np.argmin(self.value(grid)))
        step = grid[1] - grid[0]
        x, _ = golden_minimize(self.value, np.array([grid[k] - step]), np.array([grid[k] + step]))
        return float(x[0])

    def convexity_violation(self, radius: float, samples: int = 401) -> float:
        """Max of ``H((p1+p2)/2) - (H(p1)+H(p2))/2`` over sampled pairs."""
        p = np.linspace(-radius, radius, samples)
        p1, p2 = np.meshgrid(p, p)
        return float(np.max(self.value(0.5 * (p1 + p2)) - 0.5 * (self.value(p1) + self.value(p2))))

    def is_coercive_on(self, radius: float) -> bool:
        """``H(±radius)`` strictly above ``H(0)`` and growing outward."""
        h0 = float(self.value(0.0))
        ends = self.value(np.array([-radius, radius]))
        return bool(np.all(ends > h0) and self.derivative(radius) > 0 > self.derivative(-radius))


def gamma_bound(H: Hamiltonian, R: float, samples: int = 100001) -> float:
    """Smallest ``gamma`` with ``|H'(p)| <= 2 gamma`` on ``|p| <= R``, plus 1%."""
    if R <= 0:
        raise ValueError("R must be positive")
    p = np.linspace(-R, R, samples)
    return 1.01 * 0.5 * float(np.max(np.abs(H.derivative(p))))


def legendre(H: Hamiltonian, q, p_lo: float = -50.0, p_hi: float = 50.0, samples: int = 2001):
    """``L(q) = max_p (p q - H(p))``, vectorized in ``q``.

    Coarse scan of ``[p_lo, p_hi]`` followed by golden-section refinement.
    Raises :class:`RangeTooSmall` when the scan peaks at an endpoint.
    """
    q = np.asarray(q, dtype=float)
    if H.kind == "quadratic":
        return 0.5 * q * q
    scalar = q.ndim == 0
    qf = np.atleast_1d(q).ravel()
    p = np.linspace(p_lo, p_hi, samples)
    # chunk rows so the scan table stays small
    best = np.empty(qf.size, dtype=np.intp)
    Hp = H.value(p)
    for start in range(0, qf.size, 2048):
        block = qf[start : start + 2048, None] * p[None, :] - Hp[None, :]
        best[start : start + 2048] = np.argmax(block, axis=1)
    if np.any((best == 0) | (best == samples - 1)):
        raise RangeTooSmall(f"maximizer of p*q - H(p) not interior to [{p_lo}, {p_hi}]")
    step = p[1] - p[0]
    lo = p[best] - step
    hi = p[best] + step
    _, neg = golden_minimize(lambda x: H.value(x) - qf * x, lo, hi, tol=1e-13)
    out = -neg
    return float(out[0]) if scalar else out.reshape(q.shape)


def young_lower_bound(a, b, h):
    """Lower bound ``-a/(2 sqrt h) - (sqrt h / 2) a b**2`` for ``a*b`` when ``a >= 0``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rh = np.sqrt(h)
    return -a / (2.0 * rh) - 0.5 * rh * a * b * b


def _ramp(x, eps):
    """C^1 ramp matching ``max(x, 0)`` outside ``[0, eps]``; returns (r, r', r'')."""
    x = np.asarray(x, dtype=float)
    inner = (x > 0) & (x < eps)
    upper = x >= eps
    r = np.where(upper, x - 0.5 * eps, np.where(inner, x * x / (2.0 * eps), 0.0))
    dr = np.where(upper, 1.0, np.where(inner, x / eps, 0.0))
    ddr = np.where(inner, 1.0 / eps, 0.0)
    return r, dr, ddr


FLUX_KINDS = ("crandall_lions", "split", "upwind_quadratic", "smoothed_upwind")


@dataclass(frozen=True)
class NumericalFlux:
    """Two-argument numerical Hamiltonian ``F(p, q)``.

    Build with :meth:`crandall_lions`, :meth:`split`, :meth:`upwind_quadratic`
    or :meth:`smoothed_upwind`.
    """

    kind: str
    hamiltonian: Hamiltonian
    gamma: float = 0.0
    eps: float = 0.0
    pstar: float = 0.0

    @classmethod
    def crandall_lions(cls, H: Hamiltonian, gamma: float) -> NumericalFlux:
        """``F(p,q) = H((q-p)/2) + gamma (p+q)``; monotone where ``|H'| <= 2 gamma``."""
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        return cls("crandall_lions", H, gamma=float(gamma))

    @classmethod
    def split(cls, H: Hamiltonian) -> NumericalFlux:
        """``F(p,q) = F1(p) + F2(q)`` built from the two monotone branches of ``H``.

        ``H`` is recentred at its minimizer ``p*`` through
        ``K(s) = H(s + p*) - H(p*)``, which has ``K(0) = 0 = min K``.  Then
        ``F(p,q) = F1(p + p*) + F2(q - p*) + H(p*)`` with ``F1(s) = K(-s)``
        and ``F2(s) = K(s)`` for ``s > 0`` (zero otherwise), so
        ``F(-p, p) = H(p)`` for any convex ``H``.
        """
        return cls("split", H, pstar=H.argmin())

    @classmethod
    def upwind_quadratic(cls) -> NumericalFlux:
        """``F(p,q) = (p^+)^2/2 + (q^+)^2/2`` for ``H(p) = p^2/2``."""
        return cls("upwind_quadratic", Hamiltonian.quadratic())

    @classmethod
    def smoothed_upwind(cls, eps: float) -> NumericalFlux:
        """Upwind quadratic flux with ``x^+`` replaced by a ramp of width ``eps``."""
        if eps <= 0:
            raise ValueError("eps must be positive")
        return cls("smoothed_upwind", Hamiltonian.quadratic(), eps=float(eps))

    @property
    def label(self) -> str:
        if self.kind == "crandall_lions":
            return f"crandall_lions(gamma={self.gamma:g})"
        if self.kind == "smoothed_upwind":
            return f"smoothed_upwind(eps={self.eps:g})"
        return self.kind

    @property
    def has_hessian(self) -> bool:
        if self.kind == "crandall_lions":
            return self.hamiltonian.has_second
        return self.kind == "smoothed_upwind"

    # split branches of the recentred Hamiltonian
    def _branch_left(self, p):
        H, ps = self.hamiltonian, self.pstar
        s = p + ps
        return np.where(s > 0, H.value(-s + ps) - H.value(ps), 0.0)

    def _branch_right(self, q):
        H, ps = self.hamiltonian, self.pstar
        s = q - ps
        return np.where(s > 0, H.value(s + ps) - H.value(ps), 0.0)

    def value(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.kind == "upwind_quadratic":
            pp = np.maximum(p, 0.0)
            qq = np.maximum(q, 0.0)
            return 0.5 * pp * pp + 0.5 * qq * qq
        if self.kind == "crandall_lions":
            return self.hamiltonian.value(0.5 * (q - p)) + self.gamma * (p + q)
        if self.kind == "smoothed_upwind":
            rp = _ramp(p, self.eps)[0]
            rq = _ramp(q, self.eps)[0]
            return 0.5 * rp * rp + 0.5 * rq * rq
        return self._branch_left(p) + self._branch_right(q) + self.hamiltonian.value(self.pstar)

    def grad(self, p, q):
        """``(D_p F, D_q F)``; upwind kinks use the value 0."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.kind == "upwind_quadratic":
            return np.maximum(p, 0.0), np.maximum(q, 0.0)
        if self.kind == "crandall_lions":
            dH = self.hamiltonian.derivative(0.5 * (q - p))
            return self.gamma - 0.5 * dH, self.gamma + 0.5 * dH
        if self.kind == "smoothed_upwind":
            rp, drp, _ = _ramp(p, self.eps)
            rq, drq, _ = _ramp(q, self.eps)
            return rp * drp, rq * drq
        H, ps = self.hamiltonian, self.pstar
        sp = p + ps
        sq = q - ps
        dp = np.where(sp > 0, -H.derivative(-sp + ps), 0.0)
        dq = np.where(sq > 0, H.derivative(sq + ps), 0.0)
        return dp, dq

    def hessian(self, p, q):
        """``(D_pp F, D_pq F, D_qq F)`` for fluxes with bounded second derivatives."""
        if not self.has_hessian:
            raise UnsupportedOperation(f"{self.label} has no second derivatives")
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.kind == "crandall_lions":
            d2 = 0.25 * self.hamiltonian.second(0.5 * (q - p))
            return d2, -d2, d2
        rp, drp, ddrp = _ramp(p, self.eps)
        rq, drq, ddrq = _ramp(q, self.eps)
        return drp * drp + rp * ddrp, np.zeros_like(rp * rq), drq * drq + rq * ddrq

    def max_speed(self, R: float, samples: int = 201) -> float:
        """``sup (D_p F + D_q F)`` over the box ``|p|, |q| <= R``."""
        g = np.linspace(-R, R, samples)
        P, Q = np.meshgrid(g, g)
        dp, dq = self.grad(P, Q)
        return float(np.max(dp + dq))

    def max_partials(self, R: float, samples: int = 201) -> tuple[float, float]:
        g = np.linspace(-R, R, samples)
        P, Q = np.meshgrid(g, g)
        dp, dq = self.grad(P, Q)
        return float(np.max(dp)), float(np.max(dq))


def flux_value(F: NumericalFlux, p, q):
    return F.value(p, q)


def flux_grad(F: NumericalFlux, p, q):
    return F.grad(p, q)


def consistency_check(F: NumericalFlux, p_lo: float, p_hi: float, samples: int = 1001) -> float:
    """Max of ``|F(-p, p) - H(p)|`` over a uniform sample of ``[p_lo, p_hi]``."""
    if not p_lo < p_hi or samples < 2:
        raise ValueError("need p_lo < p_hi and samples >= 2")
    p = np.linspace(p_lo, p_hi, samples)
    return float(np.max(np.abs(F.value(-p, p) - F.hamiltonian.value(p))))


def _box(box):
    if np.isscalar(box):
        return -float(box), float(box)
    lo, hi = box
    return float(lo), float(hi)


def monotonicity_check(F: NumericalFlux, box=1.0, samples: int = 201) -> float:
    """Smallest sampled partial derivative on the box; monotone iff ``>= -1e-12``."""
    lo, hi = _box(box)
    g = np.linspace(lo, hi, samples)
    P, Q = np.meshgrid(g, g)
    dp, dq = F.grad(P, Q)
    return float(min(np.min(dp), np.min(dq)))


def convexity_check(F: NumericalFlux, box=1.0, samples: int = 64, seed: int = 0) -> float:
    """Largest midpoint-convexity violation over ``samples**2`` random pairs."""
    lo, hi = _box(box)
    rng = np.random.default_rng(seed)
    z1 = rng.uniform(lo, hi, size=(samples * samples, 2))
    z2 = rng.uniform(lo, hi, size=(samples * samples, 2))
    mid = 0.5 * (z1 + z2)
    gap = F.value(mid[:, 0], mid[:, 1]) - 0.5 * (F.value(z1[:, 0], z1[:, 1]) + F.value(z2[:, 0], z2[:, 1]))
    return float(np.max(gap))
