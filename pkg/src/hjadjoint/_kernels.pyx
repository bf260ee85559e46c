# cython: language_level=3
"""Compiled inner loops; see ``_fallback.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, floor, NAN

cnp.import_array()


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t n) nogil:
    i = i % n
    if i < 0:
        i += n
    return i


def upwind_euler_steps(u_in, Py_ssize_t m, double h, double dt, Py_ssize_t nsteps):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.array(u_in, dtype=np.float64, copy=True)
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.empty(n, dtype=np.float64)
    cdef double[::1] uv = u
    cdef double[::1] wv = w
    cdef double[::1] tmp
    cdef Py_ssize_t k, i
    cdef double p, q, pp, qq
    with nogil:
        for k in range(nsteps):
            for i in range(n):
                p = -((uv[_wrap(i + m, n)] - uv[i]) / h)
                q = (uv[i] - uv[_wrap(i - m, n)]) / h
                pp = p if p > 0.0 else 0.0
                qq = q if q > 0.0 else 0.0
                wv[i] = uv[i] - dt * (0.5 * pp * pp + 0.5 * qq * qq)
            tmp = uv
            uv = wv
            wv = tmp
    return np.asarray(uv).copy()


def crandall_lions_quadratic_euler_steps(u_in, Py_ssize_t m, double h, double dt,
                                         double gamma, Py_ssize_t nsteps):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.array(u_in, dtype=np.float64, copy=True)
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.empty(n, dtype=np.float64)
    cdef double[::1] uv = u
    cdef double[::1] wv = w
    cdef double[::1] tmp
    cdef Py_ssize_t k, i
    cdef double p, q, s
    with nogil:
        for k in range(nsteps):
            for i in range(n):
                p = -((uv[_wrap(i + m, n)] - uv[i]) / h)
                q = (uv[i] - uv[_wrap(i - m, n)]) / h
                s = 0.5 * (q - p)
                wv[i] = uv[i] - dt * (0.5 * s * s + gamma * (p + q))
            tmp = uv
            uv = wv
            wv = tmp
    return np.asarray(uv).copy()


def stencil_step(v_in, a_in, b_in, Py_ssize_t m, double h, double dt):
    cdef double[::1] v = np.ascontiguousarray(v_in, dtype=np.float64)
    cdef double[::1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double ca, cb
    with nogil:
        for i in range(n):
            ca = dt * a[i] / h
            cb = dt * b[i] / h
            o[i] = (1.0 - ca - cb) * v[i] + ca * v[_wrap(i + m, n)] + cb * v[_wrap(i - m, n)]
    return out


def stencil_transpose_step(s_in, a_in, b_in, Py_ssize_t m, double h, double dt):
    cdef double[::1] s = np.ascontiguousarray(s_in, dtype=np.float64)
    cdef double[::1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t j, jl, jr
    cdef double ca, cb, cal, cbr
    with nogil:
        for j in range(n):
            jl = _wrap(j - m, n)
            jr = _wrap(j + m, n)
            ca = dt * a[j] / h
            cb = dt * b[j] / h
            cal = dt * a[jl] / h
            cbr = dt * b[jr] / h
            o[j] = (1.0 - ca - cb) * s[j] + cal * s[jl] + cbr * s[jr]
    return out


def hopf_lax_scan_quadratic(samples_in, xs_in, double t, double half_width):
    cdef double[::1] samples = np.ascontiguousarray(samples_in, dtype=np.float64)
    cdef double[::1] xs = np.ascontiguousarray(xs_in, dtype=np.float64).ravel()
    cdef Py_ssize_t N = samples.shape[0]
    cdef Py_ssize_t nx = xs.shape[0]
    best = np.full((nx, 2), np.nan)
    cdef double[:, ::1] bv = best
    cdef Py_ssize_t k, j, j0, j1, jj, b1, b2, cnt, jmin
    cdef double x, d, prev, cur, nxt, v1, v2, vmin
    cdef double inv_n = 1.0 / N
    cdef double inv_2t = 1.0 / (2.0 * t)
    with nogil:
        for k in range(nx):
            x = xs[k]
            j0 = <Py_ssize_t> ceil((x - half_width) * N)
            j1 = <Py_ssize_t> floor((x + half_width) * N)
            b1 = 0
            b2 = 0
            v1 = 1e300
            v2 = 1e300
            cnt = 0
            jj = _wrap(j0, N)
            d = x - j0 * inv_n
            prev = samples[jj] + d * d * inv_2t
            vmin = prev
            jmin = j0
            jj += 1
            if jj == N:
                jj = 0
            d = x - (j0 + 1) * inv_n
            cur = samples[jj] + d * d * inv_2t
            for j in range(j0 + 1, j1):
                jj += 1
                if jj == N:
                    jj = 0
                d = x - (j + 1) * inv_n
                nxt = samples[jj] + d * d * inv_2t
                if cur < vmin:
                    vmin = cur
                    jmin = j
                if cur <= prev and cur <= nxt:
                    cnt += 1
                    if cur < v1:
                        v2 = v1
                        b2 = b1
                        v1 = cur
                        b1 = j
                    elif cur < v2:
                        v2 = cur
                        b2 = j
                prev = cur
                cur = nxt
            if cur < vmin:
                vmin = cur
                jmin = j1
            if cnt == 0:
                bv[k, 0] = jmin * inv_n
            else:
                bv[k, 0] = b1 * inv_n
                if cnt > 1:
                    bv[k, 1] = b2 * inv_n
    return best
