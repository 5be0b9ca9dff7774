"""Drift estimation from the nonlocal Kramers-Moyal relation.

For every ball radius eps the drift satisfies

    b_i(z) = lim_{t->0} t^-1 * integral_{|x-z|<eps} (x_i - z_i) p(x, t | z, 0) dx,

which is estimated either directly from burst samples or by quadrature
against a fitted conditional density.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IntegrationError, LevyExtractError, QueryError

DEFAULT_EPSILON = {1: 0.08, 2: 0.2}


def default_epsilon(dim):
    return DEFAULT_EPSILON.get(dim, 0.2)


@dataclass(frozen=True)
class DriftQuery:
    z: tuple
    epsilon: float
    t_star: float

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(float(v) for v in np.atleast_1d(self.z)))
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if not self.t_star > 0:
            raise DomainError(f"t_star must be positive, got {self.t_star}")

    @property
    def point(self):
        return np.array(self.z)


@dataclass
class DirectDriftStats:
    value: np.ndarray
    stderr: np.ndarray
    n_launched: int
    n_in_ball: int

    @property
    def degenerate(self):
        return self.n_in_ball == 0


@dataclass
class DriftField:
    grid: np.ndarray
    values: np.ndarray
    method_tag: str
    flags: list = field(default_factory=list)
    stderr: np.ndarray = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float).reshape(len(self.grid), -1) \
            if len(self.grid) else np.empty((0, 0))
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if not self.flags:
            self.flags = [""] * len(self.grid)
        if len(self.flags) != len(self.grid):
            raise ValueError("one flag per grid point is required")

    def __len__(self):
        return len(self.grid)

    def rmse(self, drift):
        """Root-mean-square error against a known drift over finite entries."""
        ok = np.all(np.isfinite(self.values), axis=1)
        if not ok.any():
            return math.nan
        truth = drift(self.grid[ok])
        return float(np.sqrt(np.mean(np.sum((self.values[ok] - truth) ** 2, axis=1))))


def direct_drift_stats(ds, q, nearest=False):
    """Sample analogue of the ball-restricted first moment, with standard errors.

    The sum of in-ball increments is divided by the number of records
    launched from ``z`` (not the number inside the ball).
    """
    if len(q.z) != ds.dim:
        raise DomainError(f"query point has dimension {len(q.z)}, data has {ds.dim}")
    rows = ds.rows_for(q.point, nearest=nearest)
    if rows.size == 0:
        raise QueryError(f"no records launched from z={list(q.z)}")
    z0 = ds.z[rows[0]]
    inc = ds.x[rows] - z0
    inside = np.linalg.norm(inc, axis=1) < q.epsilon
    terms = inc * inside[:, None]
    n = rows.size
    value = terms.sum(axis=0) / (n * q.t_star)
    if n > 1:
        stderr = terms.std(axis=0, ddof=1) / math.sqrt(n) / q.t_star
    else:
        stderr = np.full(ds.dim, math.inf)
    return DirectDriftStats(value, stderr, int(n), int(inside.sum()))


def estimate_drift_direct(ds, q, nearest=False):
    """Drift vector at ``q.z`` from the records launched there."""
    return direct_drift_stats(ds, q, nearest).value


@dataclass
class QuadratureConfig:
    """Composite Gauss-Legendre rule refined by doubling the panel count."""

    nodes: int = 8
    initial_panels: int = 4
    max_panels: int = 4096
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    check_normalization: bool = True
    normalization_tol: float = 1e-2
    box_factor: float = 3.0


def _ball_moments(density, z, eps, panels, nodes):
    """Return (integral of p, integral of (x - z) p, integral of |x - z| p) over the ball."""
    dim = z.size
    t, w = np.polynomial.legendre.leggauss(nodes)
    if dim == 1:
        edges = np.linspace(-eps, eps, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        u = (mid[:, None] + half[:, None] * t).ravel()
        weights = (half[:, None] * w).ravel()
        p = np.asarray(density((z + u).reshape(-1, 1)), dtype=float).ravel()
        return (float(np.sum(weights * p)), np.array([np.sum(weights * u * p)]),
                float(np.sum(weights * np.abs(u * p))))
    if dim == 2:
        edges = np.linspace(0.0, eps, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        r = (mid[:, None] + half[:, None] * t).ravel()
        wr = (half[:, None] * w).ravel()
        n_theta = 4 * panels * nodes
        theta = (np.arange(n_theta) + 0.5) * (2.0 * math.pi / n_theta)
        wt = 2.0 * math.pi / n_theta
        rr, th = np.meshgrid(r, theta, indexing="ij")
        off = np.stack([(rr * np.cos(th)).ravel(), (rr * np.sin(th)).ravel()], axis=1)
        weight = (wr[:, None] * wt * rr).ravel()
        p = np.asarray(density(z + off), dtype=float).ravel()
        return (float(np.sum(weight * p)), (weight * p) @ off,
                float(np.sum(weight * np.abs(p) * rr.ravel())))
    raise DomainError("density quadrature supports dimensions 1 and 2")


def _mass(density, z, eps, panels, nodes):
    m = _ball_moments(density, z, eps, panels, nodes)[0]
    return m, abs(m)


def _refine(fn, cfg, scale=1.0):
    """Double the panel count until two successive results agree.

    ``fn(panels)`` returns ``(value, magnitude)``; the relative tolerance is
    taken against ``magnitude`` (the integral of the absolute integrand) so
    values that cancel to nearly zero still terminate.
    """
    panels = cfg.initial_panels
    prev, _ = fn(panels)
    while True:
        panels *= 2
        if panels > cfg.max_panels:
            raise IntegrationError(f"quadrature did not converge with {cfg.max_panels} panels")
        cur, size = fn(panels)
        diff = np.max(np.abs(np.atleast_1d(cur) - np.atleast_1d(prev))) * scale
        if diff <= max(cfg.rel_tol * size * scale, cfg.abs_tol):
            return cur
        prev = cur


def estimate_drift_density(density, q, quadrature=None):
    """Drift from quadrature of (x - z) p(x) over the ball, divided by t*.

    ``density`` maps an ``(M, n)`` array of states to ``(M,)`` density values.
    Objects with a ``total_mass`` attribute are checked against that mass
    instead of 1 (sub-probability densities restricted to the ball).
    """
    cfg = QuadratureConfig() if quadrature is None else quadrature
    z = q.point
    eps = q.epsilon
    if cfg.check_normalization:
        target = float(getattr(density, "total_mass", 1.0))
        # ball-restricted densities vanish outside the ball; integrate exactly there
        box = eps if hasattr(density, "total_mass") else cfg.box_factor * eps
        mass = _refine(lambda p: _mass(density, z, box, p, cfg.nodes), cfg)
        if abs(mass - target) > cfg.normalization_tol:
            raise IntegrationError(f"density integrates to {mass:.6g} near z, expected {target:.6g}")
    moment = _refine(lambda p: _ball_moments(density, z, eps, p, cfg.nodes)[1:], cfg,
                     scale=1.0 / q.t_star)
    return np.asarray(moment) / q.t_star


class BallConditionalDensity:
    """Sub-probability density ``P(ball) * p_model(x) / M_model(ball)`` on the ball.

    Combines an empirical ball probability with a model of the law of x
    conditioned on lying in the ball; zero outside the ball.
    """

    def __init__(self, model_density, z, epsilon, ball_probability, quadrature=None):
        self.model_density = model_density
        self.z = np.atleast_1d(np.asarray(z, dtype=float))
        self.epsilon = float(epsilon)
        self.total_mass = float(ball_probability)
        cfg = QuadratureConfig() if quadrature is None else quadrature
        self.model_mass = _refine(
            lambda p: _mass(model_density, self.z, self.epsilon, p, cfg.nodes), cfg)
        if not self.model_mass > 0:
            raise IntegrationError("model assigns no mass to the ball")

    def __call__(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.z.size)
        inside = np.linalg.norm(x - self.z, axis=1) < self.epsilon
        out = np.zeros(x.shape[0])
        if inside.any():
            out[inside] = (self.total_mass / self.model_mass
                           * np.asarray(self.model_density(x[inside])).ravel())
        return out


def estimate_drift_field(source, grid, epsilon, t_star, method="direct", nearest=False,
                         quadrature=None, threads=None):
    """Map the per-point estimator over ``grid``, preserving order.

    ``source`` is a BurstDataset for ``method="direct"`` or a callable
    ``z -> density`` for ``method="density"``. Failures at single points
    become NaN entries with a flag instead of aborting the field.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        return DriftField(np.empty((0, 0)), np.empty((0, 0)), method)
    grid = grid.reshape(-1, 1) if grid.ndim == 1 else grid

    def one(z):
        q = DriftQuery(z, epsilon, t_star)
        try:
            if method == "direct":
                st = direct_drift_stats(source, q, nearest)
                return st.value, st.stderr, ("empty_ball" if st.degenerate else "")
            if method == "density":
                val = estimate_drift_density(source(z), q, quadrature)
                return val, np.full(z.size, math.nan), ""
        except LevyExtractError as exc:
            return (np.full(z.size, math.nan), np.full(z.size, math.nan),
                    type(exc).__name__)
        raise ValueError(f"unknown method {method!r}")

    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, grid))
    else:
        results = [one(z) for z in grid]
    values = np.array([r[0] for r in results])
    stderr = np.array([r[1] for r in results])
    flags = [r[2] for r in results]
    return DriftField(grid, values, method, flags, stderr)


def epsilon_sweep(ds, z, epsilons, nearest=False):
    """Direct estimates and standard errors at ``z`` for several ball radii."""
    out = []
    for eps in epsilons:
        st = direct_drift_stats(ds, DriftQuery(z, eps, ds.t_star), nearest)
        out.append((float(eps), st.value, st.stderr))
    return out


def save_field(fld, path):
    dim = fld.grid.shape[1] if len(fld) else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"z_{i}" for i in range(1, dim + 1)]
                        + [f"b_{i}" for i in range(1, dim + 1)] + ["method", "flag"])
        for z, b, flag in zip(fld.grid, fld.values, fld.flags):
            writer.writerow([repr(float(v)) for v in z] + [repr(float(v)) for v in b]
                            + [fld.method_tag, flag])


def load_field(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    dim = sum(1 for h in header if h.startswith("z_"))
    if header != ([f"z_{i}" for i in range(1, dim + 1)] + [f"b_{i}" for i in range(1, dim + 1)]
                  + ["method", "flag"]):
        raise ValueError(f"unexpected drift field header {header}")
    if not body:
        return DriftField(np.empty((0, 0)), np.empty((0, 0)), "direct")
    grid = np.array([[float(v) for v in r[:dim]] for r in body])
    values = np.array([[float(v) for v in r[dim:2 * dim]] for r in body])
    return DriftField(grid, values, body[0][2 * dim], [r[2 * dim + 1] for r in body])


def fit_ball_flow(ds, z, epsilon, family=None, train_config=None, nearest=False, **arch):
    """Train a flow on the records from ``z`` that land inside the eps-ball.

    The flow's standardizing map sends the ball onto ``[-B, B]`` coordinates,
    so in 1D the spline domain coincides with the ball. Returns
    ``(model, history, ball_probability)``.
    """
    from . import flows

    rows = ds.rows_for(z, nearest=nearest)
    if rows.size == 0:
        raise QueryError(f"no records launched from z={np.atleast_1d(z).tolist()}")
    z0 = ds.z[rows[0]]
    inc = ds.x[rows] - z0
    inside = np.linalg.norm(inc, axis=1) < epsilon
    if inside.sum() < 2:
        raise QueryError(f"fewer than 2 records inside the ball at z={z0.tolist()}")
    family = family or ("spline" if ds.dim == 1 else "realnvp")
    if family == "spline":
        bound = arch.pop("bound", 3.0)
        model = flows.build_spline_flow(ds.dim, shift=z0, scale=epsilon / bound,
                                        bound=bound, **arch)
    elif family == "realnvp":
        model = flows.build_realnvp_flow(ds.dim, shift=z0, scale=epsilon / 3.0, **arch)
    else:
        raise ValueError(f"unknown flow family {family!r}")
    model, history = flows.train(model, ds.x[rows][inside], train_config)
    return model, history, float(inside.sum()) / rows.size


def estimate_drift_flow(ds, z, epsilon, family=None, train_config=None, quadrature=None,
                        nearest=False, **arch):
    """Density-route drift at ``z``: fit a ball flow, then integrate it.

    Returns ``(drift, model, history)``.
    """
    model, history, prob = fit_ball_flow(ds, z, epsilon, family, train_config, nearest, **arch)
    z0 = ds.z[ds.rows_for(z, nearest=nearest)[0]]
    density = BallConditionalDensity(model.density, z0, epsilon, prob, quadrature)
    q = DriftQuery(z0, epsilon, ds.t_star)
    return estimate_drift_density(density, q, quadrature), model, history
