"""NumPy reference implementation of the rational-quadratic spline kernels.

Every kernel takes per-element knot tables ``xk, yk, dk`` of shape
``(N, K + 1)`` (knot positions, knot values, knot derivatives) and treats
points outside ``[xk[:, 0], xk[:, K]]`` as the identity map.
"""

import numpy as np


def _locate(v, knots):
    k = knots.shape[1] - 1
    idx = np.sum(v[:, None] >= knots[:, 1:-1], axis=1)
    inside = (v >= knots[:, 0]) & (v <= knots[:, k])
    return idx, inside


def _bin(idx, xk, yk, dk):
    rows = np.arange(idx.shape[0])
    x0, x1 = xk[rows, idx], xk[rows, idx + 1]
    y0, y1 = yk[rows, idx], yk[rows, idx + 1]
    d0, d1 = dk[rows, idx], dk[rows, idx + 1]
    return x0, x1, y0, y1, d0, d1


def rqs_forward(x, xk, yk, dk):
    with np.errstate(all="ignore"):
        return _rqs_forward(x, xk, yk, dk)


def _rqs_forward(x, xk, yk, dk):
    x = np.asarray(x, dtype=float)
    idx, inside = _locate(x, xk)
    x0, x1, y0, y1, d0, d1 = _bin(idx, xk, yk, dk)
    w = x1 - x0
    h = y1 - y0
    s = h / w
    xi = (x - x0) / w
    q = xi * (1.0 - xi)
    den = s + (d0 + d1 - 2.0 * s) * q
    num = h * (s * xi * xi + d0 * q)
    a = d1 * xi * xi + 2.0 * s * q + d0 * (1.0 - xi) ** 2
    y = np.where(inside, y0 + num / den, x)
    logd = np.where(inside, 2.0 * np.log(s) + np.log(a) - 2.0 * np.log(den), 0.0)
    return y, logd


def rqs_inverse(y, xk, yk, dk):
    with np.errstate(all="ignore"):
        return _rqs_inverse(y, xk, yk, dk)


def _rqs_inverse(y, xk, yk, dk):
    y = np.asarray(y, dtype=float)
    idx, inside = _locate(y, yk)
    x0, x1, y0, y1, d0, d1 = _bin(idx, xk, yk, dk)
    w = x1 - x0
    h = y1 - y0
    s = h / w
    dy = y - y0
    c2 = d0 + d1 - 2.0 * s
    qa = h * (s - d0) + dy * c2
    qb = h * d0 - dy * c2
    qc = -s * dy
    disc = np.maximum(qb * qb - 4.0 * qa * qc, 0.0)
    xi = 2.0 * qc / (-qb - np.sqrt(disc))
    x = np.where(inside, x0 + xi * w, y)
    q = xi * (1.0 - xi)
    den = s + c2 * q
    a = d1 * xi * xi + 2.0 * s * q + d0 * (1.0 - xi) ** 2
    logd = 2.0 * np.log(s) + np.log(a) - 2.0 * np.log(den)
    return x, np.where(inside, -logd, 0.0)


def rqs_backward(x, xk, yk, dk, gy, gl):
    """Vector-Jacobian product of ``rqs_forward`` for upstream ``(gy, gl)``.

    Returns gradients with respect to ``x`` and the three knot tables.
    """
    with np.errstate(all="ignore"):
        return _rqs_backward(x, xk, yk, dk, gy, gl)


def _rqs_backward(x, xk, yk, dk, gy, gl):
    x = np.asarray(x, dtype=float)
    n, kp1 = xk.shape
    idx, inside = _locate(x, xk)
    x0, x1, y0, y1, d0, d1 = _bin(idx, xk, yk, dk)
    w = x1 - x0
    h = y1 - y0
    s = h / w
    xi = (x - x0) / w
    q = xi * (1.0 - xi)
    c2 = d0 + d1 - 2.0 * s
    den = s + c2 * q
    num = h * (s * xi * xi + d0 * q)
    a = d1 * xi * xi + 2.0 * s * q + d0 * (1.0 - xi) ** 2
    den2 = den * den
    one_m2q = 1.0 - 2.0 * q
    one_m2xi = 1.0 - 2.0 * xi

    dy_dh = (s * xi * xi + d0 * q) / den
    dy_ds = (h * xi * xi * den - num * one_m2q) / den2
    dy_dd0 = (h * q * den - num * q) / den2
    dy_dd1 = -num * q / den2
    dy_dxi = (h * (2.0 * s * xi + d0 * one_m2xi) * den - num * c2 * one_m2xi) / den2

    dl_ds = 2.0 / s + 2.0 * q / a - 2.0 * one_m2q / den
    dl_dd0 = (1.0 - xi) ** 2 / a - 2.0 * q / den
    dl_dd1 = xi * xi / a - 2.0 * q / den
    dl_dxi = ((2.0 * d1 * xi + 2.0 * s * one_m2xi - 2.0 * d0 * (1.0 - xi)) / a
              - 2.0 * c2 * one_m2xi / den)

    g_xi = gy * dy_dxi + gl * dl_dxi
    g_s = gy * dy_ds + gl * dl_ds
    g_h = gy * dy_dh + g_s / w

    gx = np.where(inside, g_xi / w, gy)
    g_x0 = np.where(inside, g_xi * (xi - 1.0) / w + g_s * s / w, 0.0)
    g_x1 = np.where(inside, -g_xi * xi / w - g_s * s / w, 0.0)
    g_y0 = np.where(inside, gy - g_h, 0.0)
    g_y1 = np.where(inside, g_h, 0.0)
    g_d0 = np.where(inside, gy * dy_dd0 + gl * dl_dd0, 0.0)
    g_d1 = np.where(inside, gy * dy_dd1 + gl * dl_dd1, 0.0)

    rows = np.arange(n)
    gxk = np.zeros((n, kp1))
    gyk = np.zeros((n, kp1))
    gdk = np.zeros((n, kp1))
    gxk[rows, idx] += g_x0
    gxk[rows, idx + 1] += g_x1
    gyk[rows, idx] += g_y0
    gyk[rows, idx + 1] += g_y1
    gdk[rows, idx] += g_d0
    gdk[rows, idx + 1] += g_d1
    return gx, gxk, gyk, gdk
