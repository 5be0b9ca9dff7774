"""Moment estimates of alpha and sigma from the log-amplitude of burst increments."""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import specfn
from .errors import DomainError, EstimationError


@dataclass
class LevyEstimate:
    alpha_hat: float
    sigma_hat: float
    m: float
    V: float
    n_used: int
    n_excluded: int = 0
    flags: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _log_amplitudes(increments):
    amp = np.linalg.norm(np.atleast_2d(increments), axis=1)
    keep = amp > 0
    return np.log(amp[keep]), int((~keep).sum())


def log_amplitude_stats(ds):
    """Sample mean and unbiased variance of ln|x - z|.

    Returns ``(m, V, n_used, n_excluded)``; zero increments are excluded.
    """
    logs, excluded = _log_amplitudes(ds.increments)
    if logs.size < 2:
        raise EstimationError(f"fewer than 2 usable records ({logs.size} after "
                              f"excluding {excluded} zero increments)")
    m = float(np.mean(logs))
    v = float(np.var(logs, ddof=1))
    return m, v, int(logs.size), excluded


def gaussian_floor(dim):
    """Variance of ln R in the Gaussian limit alpha -> 2."""
    return 0.25 * specfn.trigamma(0.5 * dim)


def estimate_alpha(V, dim):
    """Invert the log-amplitude variance for the stability index."""
    floor = gaussian_floor(dim)
    if not math.isfinite(V) or V < floor:
        raise EstimationError(f"variance below Gaussian floor: V={V!r} < {floor!r}")
    bracket = 6.0 / math.pi ** 2 * (V - floor) + 0.25
    return bracket ** -0.5


def estimate_sigma(m, alpha_hat, t_star, dim):
    """Noise intensity from the log-amplitude mean, given alpha and the lag."""
    if not t_star > 0:
        raise DomainError(f"t_star must be positive, got {t_star}")
    if not alpha_hat > 0:
        raise DomainError(f"alpha_hat must be positive, got {alpha_hat}")
    inv = 1.0 / alpha_hat
    expo = (m - specfn.EULER_GAMMA * (inv - 0.5) - 0.5 * specfn.digamma(0.5 * dim)
            - inv * math.log(t_star))
    sigma = 0.5 * math.exp(expo) if expo < 709.0 else math.inf
    if not (math.isfinite(sigma) and sigma > 0):
        raise EstimationError(f"non-finite noise intensity (exponent {expo!r})")
    return sigma


def _estimate(increments, t_star, dim):
    logs, excluded = _log_amplitudes(increments)
    if logs.size < 2:
        raise EstimationError(f"fewer than 2 usable records ({logs.size} after "
                              f"excluding {excluded} zero increments)")
    m = float(np.mean(logs))
    v = float(np.var(logs, ddof=1))
    alpha = estimate_alpha(v, dim)
    flags = []
    if not 1.0 < alpha < 2.0:
        flags.append("alpha_outside_(1,2)")
    if excluded:
        flags.append("zero_increments_excluded")
    sigma = estimate_sigma(m, alpha, t_star, dim)
    return LevyEstimate(alpha, sigma, m, v, int(logs.size), excluded, flags)


def estimate_levy(ds):
    """Pool every record of ``ds`` and estimate (alpha, sigma)."""
    return _estimate(ds.increments, ds.t_star, ds.dim)


def estimate_levy_per_z(ds):
    """Separate estimates for each distinct initial point, keyed by tuple(z)."""
    keys, inverse = np.unique(ds.z, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    out = {}
    inc = ds.increments
    for k, key in enumerate(keys):
        out[tuple(key.tolist())] = _estimate(inc[inverse == k], ds.t_star, ds.dim)
    return out
