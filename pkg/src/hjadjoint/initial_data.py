"""Periodic initial data with first and second derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

TWO_PI = 2.0 * np.pi
_DENSE = np.arange(1 << 16) / float(1 << 16)


@dataclass(frozen=True)
class InitialData:
    """A periodic ``u0`` on [0, 1) with vectorized ``value``, ``dx`` and ``dxx``.

    The sup norms are taken on a dense dyadic grid of 2**16 points, which
    contains the extremal points of the trigonometric closed forms.
    """

    name: str
    value: Callable = field(repr=False, compare=False)
    dx: Callable = field(repr=False, compare=False)
    dxx: Callable = field(repr=False, compare=False)
    params: tuple = ()

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.value(_DENSE))))

    @property
    def lip(self) -> float:
        """``||(u0)_x||_inf``."""
        return float(np.max(np.abs(self.dx(_DENSE))))

    @property
    def curvature(self) -> float:
        """``||(u0)_xx||_inf``."""
        return float(np.max(np.abs(self.dxx(_DENSE))))


def cosine(amplitude: float = 1.0, k: int = 1) -> InitialData:
    w = TWO_PI * k
    return InitialData(
        "cos",
        lambda x: amplitude * np.cos(w * x),
        lambda x: -amplitude * w * np.sin(w * x),
        lambda x: -amplitude * w * w * np.cos(w * x),
        (amplitude, k),
    )


def sine(amplitude: float = 1.0, k: int = 1) -> InitialData:
    w = TWO_PI * k
    return InitialData(
        "sin",
        lambda x: amplitude * np.sin(w * x),
        lambda x: amplitude * w * np.cos(w * x),
        lambda x: -amplitude * w * w * np.sin(w * x),
        (amplitude, k),
    )


def bump() -> InitialData:
    """``sin(pi x)**4``: a smooth single hump, periodic with period 1."""
    pi = np.pi
    return InitialData(
        "bump",
        lambda x: np.sin(pi * x) ** 4,
        lambda x: 4.0 * pi * np.sin(pi * x) ** 3 * np.cos(pi * x),
        lambda x: 4.0 * pi * pi * np.sin(pi * x) ** 2 * (3.0 * np.cos(pi * x) ** 2 - np.sin(pi * x) ** 2),
    )


def constant(c: float = 0.0) -> InitialData:
    return InitialData(
        "constant",
        lambda x: np.full(np.shape(x), float(c)),
        lambda x: np.zeros(np.shape(x)),
        lambda x: np.zeros(np.shape(x)),
        (c,),
    )


def from_samples(values) -> InitialData:
    """Lattice samples; derivatives are centred differences, values are linear interpolants."""
    vals = np.array(values, dtype=float)
    n = vals.size
    d1 = (np.roll(vals, -1) - np.roll(vals, 1)) * (n / 2.0)
    d2 = (np.roll(vals, -1) - 2.0 * vals + np.roll(vals, 1)) * float(n * n)

    def interp(arr):
        xp = np.arange(n + 1) / n
        ext = np.append(arr, arr[0])
        return lambda x: np.interp(np.mod(x, 1.0), xp, ext)

    return InitialData("samples", interp(vals), interp(d1), interp(d2), (n,))


NAMED = {"cos": cosine, "sin": sine, "bump": bump, "constant": constant}


def named(spec: str) -> InitialData:
    """Parse ``cos``, ``sin``, ``bump`` or ``constant[:c]``."""
    name, _, arg = spec.partition(":")
    if name not in NAMED:
        raise ValueError(f"unknown initial data {spec!r}; choose from {sorted(NAMED)}")
    if arg:
        return NAMED[name](float(arg))
    return NAMED[name]()
