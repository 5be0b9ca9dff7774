"""End-to-end rerun of the one- and two-dimensional identification experiments."""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import systems
from .drift_estimator import (DriftField, estimate_drift_field,
                              estimate_drift_flow, save_field)
from .errors import LevyExtractError
from .flows import TrainConfig
from .levy_estimator import estimate_levy
from .simulator import SdeModel, SimConfig, default_grid, save_dataset, simulate_burst
from .stable import StableParams
from .svgplot import line_chart

REPORTED = {
    "ex1": {"alpha": 1.51, "sigma": 0.99},
    "ex2": {"alpha": 1.58, "sigma": 0.92},
}


class StageError(LevyExtractError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


@dataclass
class ReproduceConfig:
    seed: int = 0
    threads: int = None
    alpha: float = 1.5
    sigma: float = 1.0
    t_star: float = 1e-3
    n_samples: int = 5000
    grid_points_1d: int = 100
    drift_grid_points_1d: int = 50
    grid_points_2d: int = 21
    epsilon_1d: float = 0.08
    epsilon_2d: float = 0.2
    density_points_1d: int = 5
    density_points_2d: int = 3
    save_datasets: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self):
        return asdict(self)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StageError(name, exc) from exc


def _map(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _density_field(ds, points, epsilon, train_cfg, threads, seed):
    def one(z):
        cfg = TrainConfig(**{**asdict(train_cfg), "seed": seed})
        value, _, history = estimate_drift_flow(ds, z, epsilon, train_config=cfg)
        return value, history.train_nll[-1]
    results = _map(one, list(points), threads)
    fld = DriftField(np.asarray(points), np.array([r[0] for r in results]), "density")
    return fld, [r[1] for r in results]


def _levy_row(name, est, cfg):
    return {
        "experiment": name,
        "alpha_true": cfg.alpha, "sigma_true": cfg.sigma,
        "alpha_reported": REPORTED[name]["alpha"], "sigma_reported": REPORTED[name]["sigma"],
        "alpha_hat": est.alpha_hat, "sigma_hat": est.sigma_hat,
        "m": est.m, "V": est.V, "n_used": est.n_used, "flags": est.flags,
    }


def run_experiment_1d(cfg, outdir):
    threads = cfg.threads or os.cpu_count() or 1
    model = SdeModel(systems.ex1, StableParams(cfg.alpha, cfg.sigma, 1))
    sim = SimConfig(default_grid(1, cfg.grid_points_1d), cfg.n_samples, seed=cfg.seed,
                    threads=threads)
    ds = _stage("ex1/simulate", simulate_burst, model, sim, cfg.t_star)
    if cfg.save_datasets:
        save_dataset(ds, os.path.join(outdir, "ex1.csv"))
    est = _stage("ex1/estimate-levy", estimate_levy, ds)

    drift_grid = np.linspace(-2.0, 2.0, cfg.drift_grid_points_1d).reshape(-1, 1)
    sim_drift = SimConfig(drift_grid, cfg.n_samples, seed=cfg.seed + 1, threads=threads)
    ds_drift = _stage("ex1/simulate-drift-grid", simulate_burst, model, sim_drift, cfg.t_star)
    direct = _stage("ex1/drift-direct", estimate_drift_field, ds_drift, drift_grid,
                    cfg.epsilon_1d, cfg.t_star)
    pick = np.unique(np.round(np.linspace(0, len(drift_grid) - 1,
                                          cfg.density_points_1d)).astype(int))
    points = drift_grid[pick]
    density, final_nll = _stage("ex1/drift-density", _density_field, ds_drift, points,
                                cfg.epsilon_1d, cfg.train, threads, cfg.seed)
    save_field(direct, os.path.join(outdir, "ex1_drift_direct.csv"))
    save_field(density, os.path.join(outdir, "ex1_drift_density.csv"))
    fine = np.linspace(-2.0, 2.0, 201)
    line_chart([
        {"x": fine, "y": systems.ex1(fine), "label": "true drift 4x - x^3"},
        {"x": direct.grid[:, 0], "y": direct.values[:, 0], "label": "direct estimate",
         "style": "points"},
        {"x": density.grid[:, 0], "y": density.values[:, 0], "label": "flow estimate",
         "style": "points"},
    ], os.path.join(outdir, "ex1_drift.svg"), "1D system: drift", "x", "b(x)")

    direct_at = direct.values[pick]
    return {
        "levy": _levy_row("ex1", est, cfg),
        "drift": {
            "epsilon": cfg.epsilon_1d,
            "direct_rmse": direct.rmse(systems.ex1),
            "density_rmse": density.rmse(systems.ex1),
            "density_points": points[:, 0].tolist(),
            "density_values": density.values[:, 0].tolist(),
            "direct_values_at_density_points": direct_at[:, 0].tolist(),
            "direct_stderr_at_density_points": direct.stderr[pick][:, 0].tolist(),
            "final_train_nll": final_nll,
        },
    }


def run_experiment_2d(cfg, outdir):
    threads = cfg.threads or os.cpu_count() or 1
    model = SdeModel(systems.ex2, StableParams(cfg.alpha, cfg.sigma, 2))
    grid = default_grid(2, cfg.grid_points_2d)
    sim = SimConfig(grid, cfg.n_samples, seed=cfg.seed, threads=threads)
    ds = _stage("ex2/simulate", simulate_burst, model, sim, cfg.t_star)
    if cfg.save_datasets:
        save_dataset(ds, os.path.join(outdir, "ex2.csv"))
    est = _stage("ex2/estimate-levy", estimate_levy, ds)
    direct = _stage("ex2/drift-direct", estimate_drift_field, ds, grid, cfg.epsilon_2d, cfg.t_star)
    k = cfg.grid_points_2d
    diag = np.round(np.linspace(0, k - 1, cfg.density_points_2d + 2)[1:-1]).astype(int)
    pick = diag * k + diag
    points = grid[pick]
    density, final_nll = _stage("ex2/drift-density", _density_field, ds, points,
                                cfg.epsilon_2d, cfg.train, threads, cfg.seed)
    save_field(direct, os.path.join(outdir, "ex2_drift_direct.csv"))
    save_field(density, os.path.join(outdir, "ex2_drift_density.csv"))
    truth = systems.ex2(grid)
    for comp in (0, 1):
        line_chart([
            {"x": truth[:, comp], "y": truth[:, comp], "label": "identity"},
            {"x": truth[:, comp], "y": direct.values[:, comp], "label": "direct estimate",
             "style": "points"},
            {"x": systems.ex2(points)[:, comp], "y": density.values[:, comp],
             "label": "flow estimate", "style": "points"},
        ], os.path.join(outdir, f"ex2_drift_b{comp + 1}.svg"),
            f"2D system: b{comp + 1} estimated vs true", "true", "estimated")
    return {
        "levy": _levy_row("ex2", est, cfg),
        "drift": {
            "epsilon": cfg.epsilon_2d,
            "direct_rmse": direct.rmse(systems.ex2),
            "density_rmse": density.rmse(systems.ex2),
            "density_points": points.tolist(),
            "density_values": density.values.tolist(),
            "direct_values_at_density_points": direct.values[pick].tolist(),
            "final_train_nll": final_nll,
        },
    }


def _markdown(summary):
    lines = ["# Reproduction summary", "",
             "| system | quantity | true | reported | estimate |",
             "|---|---|---|---|---|"]
    for name in ("ex1", "ex2"):
        row = summary[name]["levy"]
        for q in ("alpha", "sigma"):
            lines.append(f"| {name} | {q} | {row[q + '_true']!r} | {row[q + '_reported']!r} | "
                         f"{row[q + '_hat']:.4f} |")
    lines += ["", "| system | drift method | epsilon | RMSE vs true drift |", "|---|---|---|---|"]
    for name in ("ex1", "ex2"):
        d = summary[name]["drift"]
        lines.append(f"| {name} | direct | {d['epsilon']!r} | {d['direct_rmse']:.4f} |")
        lines.append(f"| {name} | density | {d['epsilon']!r} | {d['density_rmse']:.4f} |")
    return "\n".join(lines) + "\n"


def run_reproduction(cfg=None, outdir="reproduction"):
    """Run both experiments and write ``summary.json`` / ``summary.md`` to ``outdir``."""
    cfg = ReproduceConfig() if cfg is None else cfg
    os.makedirs(outdir, exist_ok=True)
    summary = {
        "config": {k: v for k, v in cfg.to_dict().items() if k != "threads"},
        "ex1": run_experiment_1d(cfg, outdir),
        "ex2": run_experiment_2d(cfg, outdir),
    }
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    with open(os.path.join(outdir, "summary.md"), "w") as fh:
        fh.write(_markdown(summary))
    return summary


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and math.isnan(obj):
        return None
    raise TypeError(f"cannot serialize {type(obj).__name__}")
