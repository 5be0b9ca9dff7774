"""Isotropic alpha-stable laws: parameters, sampling, and closed-form moments.

Symmetric univariate draws use the Chambers-Mallows-Stuck transform.
Isotropic vectors are built as ``sqrt(A) * G`` with ``A`` a totally skewed
positive stable variate of index ``alpha / 2`` and ``G`` standard normal.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import specfn
from .errors import DomainError


@dataclass(frozen=True)
class StableParams:
    """Isotropic stable law with characteristic function exp(-gamma^alpha |u|^alpha).

    ``gamma_scale == 0`` is the degenerate point mass at the origin, which
    lets a noise-free SDE share the same model type.
    """

    alpha: float
    gamma_scale: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise DomainError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not (self.gamma_scale >= 0.0 and math.isfinite(self.gamma_scale)):
            raise DomainError(f"gamma_scale must be non-negative, got {self.gamma_scale}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError(f"dim must be a positive integer, got {self.dim}")


@dataclass(frozen=True)
class AmplitudeStats:
    mean_ln_r: float
    var_ln_r: float


def characteristic_function(params, u):
    """Evaluate exp(-gamma^alpha |u|^alpha) at ``u``.

    ``u`` may be a single frequency vector of length ``dim`` or a stack of
    them with shape ``(m, dim)``; for ``dim == 1`` scalars are accepted.
    """
    u = np.asarray(u, dtype=float)
    if params.dim == 1 and u.ndim == 0:
        u = u.reshape(1)
    if u.shape[-1] != params.dim:
        raise DomainError(f"frequency has length {u.shape[-1]}, expected {params.dim}")
    norm = np.linalg.norm(u, axis=-1)
    out = np.exp(-(params.gamma_scale ** params.alpha) * norm ** params.alpha)
    return float(out) if out.ndim == 0 else out


def _check_alpha(alpha, upper=2.0):
    if not (0.0 < alpha < upper) or alpha == 1.0:
        raise DomainError(f"alpha must lie in (0, {upper}) excluding 1, got {alpha}")


def sample_univariate_standard(alpha, rng, size=None):
    """Draw from S_alpha(1, 0, 0), i.e. E exp(iuX) = exp(-|u|^alpha)."""
    _check_alpha(alpha)
    v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size)
    w = rng.standard_exponential(size)
    x = (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
         * (np.cos(v - alpha * v) / w) ** ((1.0 - alpha) / alpha))
    return x


def sample_positive_stable(alpha_half, scale, rng, size=None):
    """Draw from S_a(scale, 1, 0) with 0 < a < 1, supported on (0, inf).

    Uses Kanter's representation of the variate with Laplace transform
    exp(-s^a) and rescales so that E exp(-sA) = exp(-(scale*s)^a / cos(pi*a/2)).
    """
    a = float(alpha_half)
    if not (0.0 < a < 1.0):
        raise DomainError(f"index must lie in (0, 1), got {a}")
    if not (scale > 0.0):
        raise DomainError(f"scale must be positive, got {scale}")
    u = rng.uniform(0.0, math.pi, size)
    w = rng.standard_exponential(size)
    kanter = (np.sin(a * u) / np.sin(u) ** (1.0 / a)
              * (np.sin((1.0 - a) * u) / w) ** ((1.0 - a) / a))
    return scale * math.cos(0.5 * math.pi * a) ** (-1.0 / a) * kanter


def mixing_scale(params):
    """Scale of the positive stable mixing variable A for ``params``."""
    a = params.alpha
    return 2.0 * params.gamma_scale ** 2 * math.cos(0.25 * math.pi * a) ** (2.0 / a)


def sample_isotropic_vector(params, rng, size=None):
    """Draw isotropic stable vectors as sqrt(A) * G.

    Returns shape ``(dim,)`` when ``size`` is None, else ``(size, dim)``.
    """
    if params.gamma_scale == 0.0:
        return np.zeros((params.dim,) if size is None else (size, params.dim))
    mix = sample_positive_stable(0.5 * params.alpha, mixing_scale(params), rng, size)
    shape = (params.dim,) if size is None else (size, params.dim)
    g = rng.standard_normal(shape)
    return np.sqrt(mix)[..., None] * g if size is not None else math.sqrt(mix) * g


def _check_nondegenerate(params):
    if params.gamma_scale == 0.0:
        raise DomainError("the amplitude of a degenerate law is identically zero")


def amplitude_fractional_moment(params, p):
    """E[R^p] for the amplitude R = |X|, finite for -dim < p < alpha."""
    n, a = params.dim, params.alpha
    _check_nondegenerate(params)
    if not (-n < p < a):
        raise DomainError(f"moment order {p} outside ({-n}, {a}); the moment diverges")
    g = specfn.gamma
    return ((2.0 * params.gamma_scale) ** p * g(1.0 - p / a) / g(1.0 - 0.5 * p)
            * g(0.5 * (n + p)) / g(0.5 * n))


def lemma1_stats(params):
    """Mean and variance of ln R in closed form."""
    _check_nondegenerate(params)
    n, a = params.dim, params.alpha
    mean = (math.log(2.0 * params.gamma_scale) + specfn.EULER_GAMMA * (1.0 / a - 0.5)
            + 0.5 * specfn.digamma(0.5 * n))
    var = math.pi ** 2 / 6.0 * (1.0 / a ** 2 - 0.25) + 0.25 * specfn.trigamma(0.5 * n)
    return AmplitudeStats(mean, var)


def jump_intensity_constant(dim, alpha):
    """Constant c(n, alpha) of the jump measure c |y|^(-n-alpha) dy."""
    if int(dim) != dim or dim < 1:
        raise DomainError(f"dim must be a positive integer, got {dim}")
    if not (0.0 < alpha < 2.0):
        raise DomainError(f"alpha must lie in (0, 2), got {alpha}")
    return (alpha * specfn.gamma(0.5 * (dim + alpha))
            / (2.0 ** (1.0 - alpha) * math.pi ** (0.5 * dim) * specfn.gamma(1.0 - 0.5 * alpha)))
