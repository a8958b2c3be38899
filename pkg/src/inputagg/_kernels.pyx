# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: cyclic Jacobi eigensolver, one-sided Jacobi SVD and
the outer-product / group-average-pooling pair used by the aggregation unit.

Every function here has a numpy twin in ``_kernels_py`` with the same
signature and the same rotation order, so both backends agree to rounding.
"""

import numpy as np

from libc.math cimport fabs, sqrt

cdef double EPS = 2.220446049250313e-16


def jacobi_sweeps(double[:, ::1] a, double[:, ::1] v, int max_sweeps):
    """Diagonalize symmetric ``a`` in place, accumulating rotations in ``v``.

    Returns the number of sweeps used, or -1 if ``max_sweeps`` ran out.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, k
    cdef int sweep, rotated
    cdef double apq, app, aqq, theta, t, c, s, akp, akq, floor_abs
    cdef double fro = 0.0
    for p in range(n):
        for q in range(n):
            fro += a[p, q] * a[p, q]
    floor_abs = sqrt(fro) * 1e-300
    for sweep in range(max_sweeps):
        rotated = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                app = a[p, p]
                aqq = a[q, q]
                if fabs(apq) <= EPS * sqrt(fabs(app * aqq)) or fabs(apq) <= floor_abs:
                    continue
                rotated = 1
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = c * akp - s * akq
                    v[k, q] = s * akp + c * akq
        if not rotated:
            return sweep + 1
    return -1


def one_sided_jacobi(double[:, ::1] a, double[:, ::1] v, int max_sweeps):
    """Orthogonalize the columns of ``a`` (m x n, m >= n) in place.

    Right rotations are accumulated in ``v``. Returns sweeps used or -1.
    """
    cdef Py_ssize_t m = a.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    cdef Py_ssize_t p, q, k
    cdef int sweep, rotated
    cdef double alpha, beta, gamma, zeta, t, c, s, x, y
    for sweep in range(max_sweeps):
        rotated = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for k in range(m):
                    alpha += a[k, p] * a[k, p]
                    beta += a[k, q] * a[k, q]
                    gamma += a[k, p] * a[k, q]
                if gamma == 0.0 or fabs(gamma) <= EPS * sqrt(alpha * beta):
                    continue
                rotated = 1
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0:
                    t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                for k in range(m):
                    x = a[k, p]
                    y = a[k, q]
                    a[k, p] = c * x - s * y
                    a[k, q] = s * x + c * y
                for k in range(n):
                    x = v[k, p]
                    y = v[k, q]
                    v[k, p] = c * x - s * y
                    v[k, q] = s * x + c * y
        if not rotated:
            return sweep + 1
    return -1


def group_outer_pool(double[:, ::1] y, int t):
    """Average of y_j y_j^T over ``t`` consecutive column groups -> (t, d, d)."""
    cdef Py_ssize_t d = y.shape[0]
    cdef Py_ssize_t q = y.shape[1]
    cdef Py_ssize_t g = q // t
    cdef Py_ssize_t i, j, r, c
    cdef double acc, scale = 1.0 / g
    out_arr = np.zeros((t, d, d), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    for i in range(t):
        for r in range(d):
            for c in range(r, d):
                acc = 0.0
                for j in range(i * g, (i + 1) * g):
                    acc += y[r, j] * y[c, j]
                acc *= scale
                out[i, r, c] = acc
                out[i, c, r] = acc
    return out_arr


def group_outer_pool_backward(double[:, :, ::1] grad, double[:, ::1] y, int t):
    """dl/dy_j = (G_i^T + G_i) y_j / |group| for column j in group i."""
    cdef Py_ssize_t d = y.shape[0]
    cdef Py_ssize_t q = y.shape[1]
    cdef Py_ssize_t g = q // t
    cdef Py_ssize_t i, j, r, c, j0
    cdef double h, scale = 1.0 / g
    dy_arr = np.zeros((d, q), dtype=np.float64)
    cdef double[:, ::1] dy = dy_arr
    sym_arr = np.empty((d, d), dtype=np.float64)
    cdef double[:, ::1] sym = sym_arr
    for i in range(t):
        j0 = i * g
        for r in range(d):
            for c in range(d):
                sym[r, c] = (grad[i, r, c] + grad[i, c, r]) * scale
        # row-times-row updates keep the innermost loop on contiguous memory
        for r in range(d):
            for c in range(d):
                h = sym[r, c]
                for j in range(j0, j0 + g):
                    dy[r, j] += h * y[c, j]
    return dy_arr
