# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled rational-quadratic spline kernels.

Same contracts as ``_kernels_py``; one pass per element, no temporaries.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt

cnp.import_array()


cdef inline Py_ssize_t _find(const double[:] knots, double v) noexcept nogil:
    cdef Py_ssize_t k = knots.shape[0] - 1
    cdef Py_ssize_t j = 0
    while j < k - 1 and v >= knots[j + 1]:
        j += 1
    return j


def rqs_forward(x, xk, yk, dk):
    cdef const double[:] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, :] X = np.ascontiguousarray(xk, dtype=np.float64)
    cdef const double[:, :] Y = np.ascontiguousarray(yk, dtype=np.float64)
    cdef const double[:, :] D = np.ascontiguousarray(dk, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], kk = X.shape[1] - 1, i, j
    out_y = np.empty(n)
    out_l = np.empty(n)
    cdef double[:] yo = out_y
    cdef double[:] lo = out_l
    cdef double v, w, h, s, xi, q, den, num, a, d0, d1
    with nogil:
        for i in range(n):
            v = xv[i]
            if v < X[i, 0] or v > X[i, kk]:
                yo[i] = v
                lo[i] = 0.0
                continue
            j = _find(X[i], v)
            w = X[i, j + 1] - X[i, j]
            h = Y[i, j + 1] - Y[i, j]
            d0 = D[i, j]
            d1 = D[i, j + 1]
            s = h / w
            xi = (v - X[i, j]) / w
            q = xi * (1.0 - xi)
            den = s + (d0 + d1 - 2.0 * s) * q
            num = h * (s * xi * xi + d0 * q)
            a = d1 * xi * xi + 2.0 * s * q + d0 * (1.0 - xi) * (1.0 - xi)
            yo[i] = Y[i, j] + num / den
            lo[i] = 2.0 * log(s) + log(a) - 2.0 * log(den)
    return out_y, out_l


def rqs_inverse(y, xk, yk, dk):
    cdef const double[:] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[:, :] X = np.ascontiguousarray(xk, dtype=np.float64)
    cdef const double[:, :] Y = np.ascontiguousarray(yk, dtype=np.float64)
    cdef const double[:, :] D = np.ascontiguousarray(dk, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0], kk = X.shape[1] - 1, i, j
    out_x = np.empty(n)
    out_l = np.empty(n)
    cdef double[:] xo = out_x
    cdef double[:] lo = out_l
    cdef double v, w, h, s, xi, q, den, a, d0, d1, dy, c2, qa, qb, qc, disc
    with nogil:
        for i in range(n):
            v = yv[i]
            if v < Y[i, 0] or v > Y[i, kk]:
                xo[i] = v
                lo[i] = 0.0
                continue
            j = _find(Y[i], v)
            w = X[i, j + 1] - X[i, j]
            h = Y[i, j + 1] - Y[i, j]
            d0 = D[i, j]
            d1 = D[i, j + 1]
            s = h / w
            dy = v - Y[i, j]
            c2 = d0 + d1 - 2.0 * s
            qa = h * (s - d0) + dy * c2
            qb = h * d0 - dy * c2
            qc = -s * dy
            disc = qb * qb - 4.0 * qa * qc
            if disc < 0.0:
                disc = 0.0
            xi = 2.0 * qc / (-qb - sqrt(disc))
            xo[i] = X[i, j] + xi * w
            q = xi * (1.0 - xi)
            den = s + c2 * q
            a = d1 * xi * xi + 2.0 * s * q + d0 * (1.0 - xi) * (1.0 - xi)
            lo[i] = -(2.0 * log(s) + log(a) - 2.0 * log(den))
    return out_x, out_l


def rqs_backward(x, xk, yk, dk, gy, gl):
    cdef const double[:] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:] gyv = np.ascontiguousarray(gy, dtype=np.float64)
    cdef const double[:] glv = np.ascontiguousarray(gl, dtype=np.float64)
    cdef const double[:, :] X = np.ascontiguousarray(xk, dtype=np.float64)
    cdef const double[:, :] Y = np.ascontiguousarray(yk, dtype=np.float64)
    cdef const double[:, :] D = np.ascontiguousarray(dk, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], kk = X.shape[1] - 1, i, j
    out_gx = np.empty(n)
    out_gxk = np.zeros((n, kk + 1))
    out_gyk = np.zeros((n, kk + 1))
    out_gdk = np.zeros((n, kk + 1))
    cdef double[:] gx = out_gx
    cdef double[:, :] gX = out_gxk
    cdef double[:, :] gY = out_gyk
    cdef double[:, :] gD = out_gdk
    cdef double v, w, h, s, xi, q, c2, den, den2, num, a, d0, d1, g_y, g_l
    cdef double one_m2q, one_m2xi, g_xi, g_s, g_h
    with nogil:
        for i in range(n):
            v = xv[i]
            g_y = gyv[i]
            g_l = glv[i]
            if v < X[i, 0] or v > X[i, kk]:
                gx[i] = g_y
                continue
            j = _find(X[i], v)
            w = X[i, j + 1] - X[i, j]
            h = Y[i, j + 1] - Y[i, j]
            d0 = D[i, j]
            d1 = D[i, j + 1]
            s = h / w
            xi = (v - X[i, j]) / w
            q = xi * (1.0 - xi)
            c2 = d0 + d1 - 2.0 * s
            den = s + c2 * q
            den2 = den * den
            num = h * (s * xi * xi + d0 * q)
            a = d1 * xi * xi + 2.0 * s * q + d0 * (1.0 - xi) * (1.0 - xi)
            one_m2q = 1.0 - 2.0 * q
            one_m2xi = 1.0 - 2.0 * xi

            g_xi = (g_y * (h * (2.0 * s * xi + d0 * one_m2xi) * den - num * c2 * one_m2xi) / den2
                    + g_l * ((2.0 * d1 * xi + 2.0 * s * one_m2xi - 2.0 * d0 * (1.0 - xi)) / a
                             - 2.0 * c2 * one_m2xi / den))
            g_s = (g_y * (h * xi * xi * den - num * one_m2q) / den2
                   + g_l * (2.0 / s + 2.0 * q / a - 2.0 * one_m2q / den))
            g_h = g_y * (s * xi * xi + d0 * q) / den + g_s / w

            gx[i] = g_xi / w
            gX[i, j] += g_xi * (xi - 1.0) / w + g_s * s / w
            gX[i, j + 1] += -g_xi * xi / w - g_s * s / w
            gY[i, j] += g_y - g_h
            gY[i, j + 1] += g_h
            gD[i, j] += g_y * (h * q * den - num * q) / den2 + g_l * ((1.0 - xi) * (1.0 - xi) / a - 2.0 * q / den)
            gD[i, j + 1] += -g_y * num * q / den2 + g_l * (xi * xi / a - 2.0 * q / den)
    return out_gx, out_gxk, out_gyk, out_gdk
