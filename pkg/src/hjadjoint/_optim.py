"""Vectorized golden-section search used by the Legendre and Hopf-Lax evaluators."""

import numpy as np

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_minimize(func, lo, hi, tol=1e-12, max_iter=200):
    """Minimize a batch of unimodal 1-D functions on ``[lo, hi]``.

    ``func`` receives an array of abscissae shaped like ``lo`` and returns
    values of the same shape.  Returns ``(argmin, min_value)``.
    """
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = func(c)
    fd = func(d)
    for _ in range(max_iter):
        if np.all(b - a <= tol):
            break
        left = fc < fd
        b, a = np.where(left, d, b), np.where(left, a, c)
        new_c = np.where(left, b - _INV_PHI * (b - a), d)
        new_d = np.where(left, c, a + _INV_PHI * (b - a))
        fp = func(np.where(left, new_c, new_d))
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = new_c, new_d
    x = np.where(fc < fd, c, d)
    return x, func(x)
