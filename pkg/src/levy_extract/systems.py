"""Built-in drift fields. Every drift maps an (N, n) array of states to (N, n)."""

import numpy as np


def ex1(x):
    """One-dimensional double well, b(x) = 4x - x^3."""
    return 4.0 * x - x ** 3


def ex2(x):
    """Coupled planar system, b(x) = (5 x1 - x2^2, 5 x1 + x2)."""
    x1, x2 = x[:, 0], x[:, 1]
    return np.stack([5.0 * x1 - x2 ** 2, 5.0 * x1 + x2], axis=1)


def zero(x):
    return np.zeros_like(x)


def linear(rate=-1.0):
    def drift(x):
        return rate * x
    drift.__name__ = f"linear({rate})"
    return drift


def polynomial(coefficients):
    """Componentwise polynomial drift, ``b_i(x) = sum_k c_k x_i^k``.

    ``coefficients`` lists c_0, c_1, ... in increasing degree.
    """
    coefficients = [float(c) for c in coefficients]

    def drift(x):
        out = np.zeros_like(x)
        for c in reversed(coefficients):
            out = out * x + c
        return out
    drift.__name__ = "poly(" + ",".join(repr(c) for c in coefficients) + ")"
    return drift


BUILTIN_DIMS = {"ex1": 1, "ex2": 2}


def get_drift(name, coefficients=None):
    if name == "ex1":
        return ex1
    if name == "ex2":
        return ex2
    if name == "zero":
        return zero
    if name == "linear":
        return linear()
    if name == "poly":
        if not coefficients:
            raise ValueError("polynomial drift needs coefficients")
        return polynomial(coefficients)
    raise ValueError(f"unknown drift {name!r}; expected ex1, ex2, zero, linear or poly")
