# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_fallback`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, exp, expm1, fabs, sqrt, isfinite

cnp.import_array()

cdef double INV_SQRT2 = 0.7071067811865476
cdef double INV_SQRT_2PI = 0.3989422804014327


cdef inline void _derivs(double x, double y, double z, double R, double G,
                         double* dx, double* dy, double* dz) noexcept nogil:
    dx[0] = y
    dy[0] = -y + R * x - G * (x + z) - R * x * z * z
    dz[0] = x


cdef inline void _rk4(double* s, double R, double G, double dt) noexcept nogil:
    cdef double h = 0.5 * dt
    cdef double k1x, k1y, k1z, k2x, k2y, k2z, k3x, k3y, k3z, k4x, k4y, k4z
    _derivs(s[0], s[1], s[2], R, G, &k1x, &k1y, &k1z)
    _derivs(s[0] + h * k1x, s[1] + h * k1y, s[2] + h * k1z, R, G, &k2x, &k2y, &k2z)
    _derivs(s[0] + h * k2x, s[1] + h * k2y, s[2] + h * k2z, R, G, &k3x, &k3y, &k3z)
    _derivs(s[0] + dt * k3x, s[1] + dt * k3y, s[2] + dt * k3z, R, G, &k4x, &k4y, &k4z)
    cdef double c = dt / 6.0
    s[0] = s[0] + c * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    s[1] = s[1] + c * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    s[2] = s[2] + c * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)


def ms_trajectory(double x0, double y0, double z0, double R, double G,
                  double dt, Py_ssize_t steps):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((steps + 1, 3))
    cdef double s[3]
    cdef Py_ssize_t i
    s[0] = x0
    s[1] = y0
    s[2] = z0
    out[0, 0] = x0
    out[0, 1] = y0
    out[0, 2] = z0
    for i in range(1, steps + 1):
        _rk4(s, R, G, dt)
        if not (isfinite(s[0]) and isfinite(s[1]) and isfinite(s[2])):
            return out[:i], i
        out[i, 0] = s[0]
        out[i, 1] = s[1]
        out[i, 2] = s[2]
    return out, -1


def ms_ensemble(states, double R, double G, double dt, Py_ssize_t steps):
    # members are independent: step them side by side so the loop body
    # pipelines instead of waiting on one RK4 dependency chain at a time
    cdef cnp.ndarray[cnp.float64_t, ndim=2] arr = np.asarray(states, dtype=np.float64)
    cdef double[::1] X = np.ascontiguousarray(arr[:, 0])
    cdef double[::1] Y = np.ascontiguousarray(arr[:, 1])
    cdef double[::1] Z = np.ascontiguousarray(arr[:, 2])
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i, k
    cdef double h = 0.5 * dt, c = dt / 6.0
    cdef double x, y, z, k1x, k1y, k1z, k2x, k2y, k2z, k3x, k3y, k3z, k4x, k4y, k4z
    with nogil:
        for k in range(steps):
            for i in range(n):
                x = X[i]
                y = Y[i]
                z = Z[i]
                _derivs(x, y, z, R, G, &k1x, &k1y, &k1z)
                _derivs(x + h * k1x, y + h * k1y, z + h * k1z, R, G, &k2x, &k2y, &k2z)
                _derivs(x + h * k2x, y + h * k2y, z + h * k2z, R, G, &k3x, &k3y, &k3z)
                _derivs(x + dt * k3x, y + dt * k3y, z + dt * k3z, R, G, &k4x, &k4y, &k4z)
                X[i] = x + c * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                Y[i] = y + c * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
                Z[i] = z + c * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
    return np.column_stack([np.asarray(X), np.asarray(Y), np.asarray(Z)])


cdef inline double _cdf1(const double[::1] w, const double[::1] mu, const double[::1] sd, double x) noexcept nogil:
    cdef Py_ssize_t j
    cdef double acc = 0.0
    for j in range(w.shape[0]):
        acc += w[j] * 0.5 * erfc(-(x - mu[j]) / sd[j] * INV_SQRT2)
    return acc


def mixture_cdf(w, mu, sd, x):
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(sd, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(xv.shape[0])
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        out[i] = _cdf1(wv, mv, sv, xv[i])
    return out


def mixture_pdf(w, mu, sd, x):
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(sd, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(xv.shape[0])
    cdef Py_ssize_t i, j
    cdef double acc, u
    for i in range(xv.shape[0]):
        acc = 0.0
        for j in range(wv.shape[0]):
            u = (xv[i] - mv[j]) / sv[j]
            acc += wv[j] * exp(-0.5 * u * u) * INV_SQRT_2PI / sv[j]
        out[i] = acc
    return out


def mixture_quantile(w, mu, sd, q, double xtol):
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(sd, dtype=np.float64)
    cdef const double[::1] qv = np.ascontiguousarray(np.atleast_1d(q), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(qv.shape[0])
    cdef double lo0 = np.min(np.asarray(mu) - 40.0 * np.asarray(sd))
    cdef double hi0 = np.max(np.asarray(mu) + 40.0 * np.asarray(sd))
    cdef double lo, hi, mid
    cdef Py_ssize_t i, it
    for i in range(qv.shape[0]):
        lo = lo0
        hi = hi0
        mid = 0.5 * (lo + hi)
        for it in range(200):
            mid = 0.5 * (lo + hi)
            if _cdf1(wv, mv, sv, mid) < qv[i]:
                lo = mid
            else:
                hi = mid
            if hi - lo <= xtol * (1.0 + fabs(mid)):
                break
        out[i] = 0.5 * (lo + hi)
    return out


def var_quadrature(h, C):
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef Py_ssize_t m = hv.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc = 0.0, row
    for i in range(m):
        row = 0.0
        for j in range(i + 1, m):
            row += hv[j] * expm1(Cv[i, j])
        acc += 2.0 * hv[i] * row + hv[i] * hv[i] * expm1(Cv[i, i])
    return acc
