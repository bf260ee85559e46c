"""Pure numpy versions of the compiled kernels.

Each function mirrors one in ``_kernels.pyx`` with the same arithmetic order,
so both backends produce bit-identical results.
"""

import numpy as np


def upwind_euler_steps(u, m, h, dt, nsteps):
    u = np.array(u, dtype=float, copy=True)
    for _ in range(nsteps):
        p = -((np.roll(u, -m) - u) / h)
        q = (u - np.roll(u, m)) / h
        pp = np.maximum(p, 0.0)
        qq = np.maximum(q, 0.0)
        u = u - dt * (0.5 * pp * pp + 0.5 * qq * qq)
    return u


def crandall_lions_quadratic_euler_steps(u, m, h, dt, gamma, nsteps):
    u = np.array(u, dtype=float, copy=True)
    for _ in range(nsteps):
        p = -((np.roll(u, -m) - u) / h)
        q = (u - np.roll(u, m)) / h
        s = 0.5 * (q - p)
        u = u - dt * (0.5 * s * s + gamma * (p + q))
    return u


def stencil_step(v, a, b, m, h, dt):
    """``v + dt * A v`` with ``(A v)_i = a_i (v_{i+m} - v_i)/h - b_i (v_i - v_{i-m})/h``."""
    ca = dt * a / h
    cb = dt * b / h
    return (1.0 - ca - cb) * v + ca * np.roll(v, -m) + cb * np.roll(v, m)


def stencil_transpose_step(sigma, a, b, m, h, dt):
    """``sigma + dt * A^T sigma`` for the stencil of :func:`stencil_step`."""
    ca = dt * a / h
    cb = dt * b / h
    return (1.0 - ca - cb) * sigma + np.roll(ca * sigma, m) + np.roll(cb * sigma, -m)


def hopf_lax_scan_quadratic(samples, xs, t, half_width):
    """Coarse minimization of ``u0(y) + (x - y)**2 / (2 t)`` on the lattice ``y = j/N``.

    ``samples`` holds one period of ``u0`` at ``j/N``.  Returns the two best
    local-minimum lattice abscissae per ``x`` (``nan`` when only one exists).
    """
    N = samples.size
    xs = np.asarray(xs, dtype=float)
    best = np.full((xs.size, 2), np.nan)
    j0 = np.ceil((xs - half_width) * N).astype(np.int64)
    j1 = np.floor((xs + half_width) * N).astype(np.int64)
    width = int(np.max(j1 - j0)) + 1
    offs = np.arange(width)
    inv_n = 1.0 / N
    inv_2t = 1.0 / (2.0 * t)
    for k in range(xs.size):
        j = j0[k] + offs[: j1[k] - j0[k] + 1]
        y = j * inv_n
        d = xs[k] - y
        vals = samples[np.mod(j, N)] + d * d * inv_2t
        interior = np.zeros(vals.size, dtype=bool)
        interior[1:-1] = (vals[1:-1] <= vals[:-2]) & (vals[1:-1] <= vals[2:])
        cand = np.flatnonzero(interior)
        if cand.size == 0:
            cand = np.array([int(np.argmin(vals))])
        order = cand[np.argsort(vals[cand], kind="stable")[:2]]
        best[k, : order.size] = y[order]
    return best
