"""Euler-Maruyama burst simulation of dx = b(x) dt + sigma dL_t, and dataset I/O."""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError, SchemaError, SimulationError
from .stable import StableParams, sample_isotropic_vector


@dataclass(frozen=True)
class SdeModel:
    """Drift ``b`` plus isotropic stable driver; ``noise.gamma_scale`` is sigma."""

    drift: object
    noise: StableParams

    @property
    def dim(self):
        return self.noise.dim

    @property
    def sigma(self):
        return self.noise.gamma_scale


@dataclass
class BurstDataset:
    """Records ``(z, x(t_star))`` stored as two ``(N, dim)`` arrays."""

    t_star: float
    z: np.ndarray
    x: np.ndarray
    metadata: dict = field(default_factory=dict)
    _groups: tuple = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.z = np.atleast_2d(np.asarray(self.z, dtype=float))
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if not (self.t_star > 0 and math.isfinite(self.t_star)):
            raise SchemaError(f"t_star must be positive, got {self.t_star}")
        if self.z.shape != self.x.shape:
            raise SchemaError(f"z has shape {self.z.shape} but x has shape {self.x.shape}")
        if self.z.shape[0] == 0:
            raise SchemaError("dataset has no records")

    @property
    def dim(self):
        return self.z.shape[1]

    def __len__(self):
        return self.z.shape[0]

    @property
    def records(self):
        return list(zip(self.z, self.x))

    @property
    def increments(self):
        return self.x - self.z

    def initial_points(self):
        """Distinct initial points and, for each record, the index of its point."""
        if self._groups is None:
            keys, inverse = np.unique(self.z, axis=0, return_inverse=True)
            self._groups = (keys, np.asarray(inverse).ravel())
        return self._groups

    def rows_for(self, z, nearest=False):
        """Row indices launched from ``z`` (or the closest initial point)."""
        keys, inverse = self.initial_points()
        z = np.asarray(z, dtype=float).reshape(-1)
        dist = np.linalg.norm(keys - z, axis=1)
        k = int(np.argmin(dist))
        if dist[k] != 0.0 and not nearest:
            return np.empty(0, dtype=int)
        return np.flatnonzero(inverse == k)

    def __eq__(self, other):
        if not isinstance(other, BurstDataset):
            return NotImplemented
        return (self.t_star == other.t_star and np.array_equal(self.z, other.z)
                and np.array_equal(self.x, other.x))


@dataclass
class SimConfig:
    z_grid: np.ndarray
    n_samples_per_z: int = 5000
    dt: float = None
    seed: int = 0
    threads: int = None

    def __post_init__(self):
        grid = np.asarray(self.z_grid, dtype=float)
        self.z_grid = grid.reshape(-1, 1) if grid.ndim == 1 else grid
        if self.n_samples_per_z < 1:
            raise DomainError("n_samples_per_z must be at least 1")
        if self.dt is not None and not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")


def default_grid(dim, points=None):
    """Uniform grid on [-2.5, 2.5] in 1D or [-2, 2]^dim otherwise."""
    if dim == 1:
        return np.linspace(-2.5, 2.5, points or 100).reshape(-1, 1)
    axis = np.linspace(-2.0, 2.0, points or 21)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _noise_increment(model, dt, rng, size=None):
    xi = sample_isotropic_vector(StableParams(model.noise.alpha, 1.0, model.dim), rng, size)
    return model.sigma * dt ** (1.0 / model.noise.alpha) * xi


def em_step(model, x, dt, rng):
    """One Euler-Maruyama step ``x + b(x) dt + sigma dt^(1/alpha) xi``.

    ``x`` is a single state of length ``dim`` or a stack ``(N, dim)``.
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    batch = np.atleast_2d(x)
    drift = np.asarray(model.drift(batch), dtype=float)
    if drift.shape != batch.shape:
        raise SimulationError(f"drift returned shape {drift.shape}, expected {batch.shape}")
    bad = ~np.all(np.isfinite(drift), axis=1)
    if bad.any():
        state = batch[np.flatnonzero(bad)[0]]
        raise SimulationError(f"non-finite drift at state {state.tolist()}", state=state)
    size = None if x.ndim == 1 else batch.shape[0]
    noise = 0.0 if model.sigma == 0 else _noise_increment(model, dt, rng, size)
    return x + drift.reshape(x.shape) * dt + noise


def _n_steps(t_star, dt):
    if dt is None or dt >= t_star:
        return 1
    return max(1, int(math.ceil(t_star / dt - 1e-9)))


def _burst(model, z, n, t_star, n_steps, seed, index):
    rng = np.random.default_rng([seed, index])
    h = t_star / n_steps
    x = np.tile(z, (n, 1))
    alive = np.ones(n, dtype=bool)
    for step in range(n_steps):
        try:
            drift = np.asarray(model.drift(x), dtype=float)
        except Exception as exc:
            raise SimulationError(f"drift failed at z={z.tolist()}, step {step}: {exc}",
                                  z=z, step=step) from exc
        noise = (_noise_increment(model, h, rng, n) if model.sigma != 0 else 0.0)
        with np.errstate(over="ignore", invalid="ignore"):
            x = x + drift * h + noise
        alive &= np.all(np.isfinite(x), axis=1)
        x[~alive] = 0.0
    return x[alive], int((~alive).sum())


def simulate_burst(model, cfg, t_star):
    """Simulate ``cfg.n_samples_per_z`` paths to ``t_star`` from every grid point.

    Grid point ``i`` draws from a stream seeded by ``(cfg.seed, i)`` so the
    output does not depend on the number of worker threads. Trajectories that
    leave the finite range are dropped and counted in the metadata.
    """
    if not t_star > 0:
        raise DomainError(f"t_star must be positive, got {t_star}")
    grid = cfg.z_grid
    if grid.shape[1] != model.dim:
        raise DomainError(f"grid has dimension {grid.shape[1]}, model has {model.dim}")
    n_steps = _n_steps(t_star, cfg.dt)

    def run(i):
        return _burst(model, grid[i], cfg.n_samples_per_z, t_star, n_steps, cfg.seed, i)

    workers = cfg.threads or os.cpu_count() or 1
    if workers == 1:
        results = [run(i) for i in range(len(grid))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(len(grid))))
    zs = [np.tile(grid[i], (len(x), 1)) for i, (x, _) in enumerate(results)]
    xs = [x for x, _ in results]
    aborted = sum(a for _, a in results)
    meta = {"seed": cfg.seed, "aborted_trajectories": aborted, "n_steps": n_steps,
            "n_samples_per_z": cfg.n_samples_per_z}
    return BurstDataset(t_star, np.concatenate(zs), np.concatenate(xs), meta)


def _header(dim):
    return [f"z_{i}" for i in range(1, dim + 1)] + [f"x_{i}" for i in range(1, dim + 1)]


def sidecar_path(path):
    return str(path) + ".json"


def save_dataset(ds, path):
    """Write CSV (17 significant digits) plus a JSON sidecar with metadata."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# t_star={ds.t_star!r},dim={ds.dim}\n")
        fh.write(",".join(_header(ds.dim)) + "\n")
        np.savetxt(fh, np.hstack([ds.z, ds.x]), fmt="%.17g", delimiter=",")
    meta = {"t_star": ds.t_star, "dim": ds.dim, "seed": ds.metadata.get("seed"),
            "aborted_trajectories": ds.metadata.get("aborted_trajectories", 0)}
    meta.update({k: v for k, v in ds.metadata.items() if k not in meta})
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_meta_line(line):
    body = line.lstrip("#").strip()
    meta = {}
    for part in body.split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise ParseError(f"malformed metadata entry {part!r}", line=1)
        meta[key.strip()] = value.strip()
    try:
        return float(meta["t_star"]), int(meta["dim"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"metadata needs numeric t_star and dim: {exc}", line=1) from None


def load_dataset(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    meta = {}
    side = sidecar_path(path)
    if os.path.exists(side):
        with open(side, encoding="utf-8") as fh:
            meta = json.load(fh)
    pos = 0
    if lines and lines[0].startswith("#"):
        t_star, dim = _parse_meta_line(lines[0])
        pos = 1
    elif "t_star" in meta and "dim" in meta:
        t_star, dim = float(meta["t_star"]), int(meta["dim"])
    else:
        raise SchemaError("no t_star/dim metadata in comment line or sidecar")
    if pos >= len(lines):
        raise SchemaError("missing column header")
    header = [h.strip() for h in lines[pos].split(",")]
    if header != _header(dim):
        raise SchemaError(f"header {header} does not match dimension {dim}; "
                          f"expected {_header(dim)}")
    body = [(i, ln) for i, ln in enumerate(lines[pos + 1:], start=pos + 2) if ln.strip()]
    if not body:
        raise SchemaError("dataset has no records")
    width = 2 * dim
    try:
        table = np.loadtxt([ln for _, ln in body], delimiter=",", ndmin=2)
        if table.shape[1] != width:
            raise ValueError
    except ValueError:
        for lineno, ln in body:
            fields = ln.split(",")
            if len(fields) != width:
                raise ParseError(f"expected {width} fields, found {len(fields)}", line=lineno) from None
            try:
                [float(v) for v in fields]
            except ValueError:
                raise ParseError(f"non-numeric field in {ln!r}", line=lineno) from None
        raise
    extra = {k: v for k, v in meta.items() if k not in ("t_star", "dim")}
    return BurstDataset(t_star, table[:, :dim], table[:, dim:], extra)
