"""Command-line interface: ``levy-extract <subcommand> ...``.

Exit codes: 0 success, 1 computation error, 2 usage error.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import systems
from .drift_estimator import (default_epsilon, estimate_drift_field, fit_ball_flow,
                              estimate_drift_flow, save_field, DriftField)
from .errors import LevyExtractError
from .flows import TrainConfig, save_model
from .levy_estimator import estimate_levy, estimate_levy_per_z
from .simulator import SdeModel, SimConfig, default_grid, load_dataset, save_dataset, simulate_burst
from .stable import StableParams
from .svgplot import line_chart

SEED_ENV = "LEVY_EXTRACT_SEED"


def _default_seed():
    value = os.environ.get(SEED_ENV)
    try:
        return int(value) if value is not None else 0
    except ValueError:
        return 0


def _positive(kind):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def _train_args(p):
    p.add_argument("--epochs", type=_positive(int), default=300)
    p.add_argument("--batch-size", type=_positive(int), default=256)
    p.add_argument("--lr", type=_positive(float), default=1e-3)


def _train_config(args):
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                       learning_rate=args.lr, seed=args.seed)


def build_parser():
    parser = argparse.ArgumentParser(prog="levy-extract", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=_default_seed())
    common.add_argument("--threads", type=_positive(int), default=None)
    common.add_argument("--config", help="JSON file of option defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a burst dataset")
    p.add_argument("--system", required=True,
                   choices=["ex1", "ex2", "zero", "linear", "poly"])
    p.add_argument("--coeffs", type=float, nargs="+", help="polynomial coefficients, low to high")
    p.add_argument("--dim", type=_positive(int), default=None)
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--tstar", type=_positive(float), default=1e-3)
    p.add_argument("--dt", type=_positive(float), default=None)
    p.add_argument("--n", type=_positive(int), default=5000, help="samples per initial point")
    p.add_argument("--grid-points", type=_positive(int), default=None)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("estimate-levy", parents=[common], help="estimate alpha and sigma")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", help="write the JSON report here as well")
    p.add_argument("--per-z", action="store_true", help="one estimate per initial point")

    p = sub.add_parser("estimate-drift", parents=[common], help="estimate the drift field")
    p.add_argument("dataset")
    p.add_argument("--method", choices=["direct", "density"], default="direct")
    p.add_argument("--epsilon", type=_positive(float), default=None)
    p.add_argument("--points", type=_positive(int), default=None,
                   help="evaluate at this many evenly spaced initial points (default: all)")
    p.add_argument("--nearest", action="store_true", help="match z to the closest initial point")
    p.add_argument("--system", choices=["ex1", "ex2"], help="known drift for the comparison plot")
    p.add_argument("--plot", help="SVG path for estimated vs true drift")
    p.add_argument("--model-dir", help="save trained flows here (density method)")
    p.add_argument("-o", "--output", required=True)
    _train_args(p)

    p = sub.add_parser("train-flow", parents=[common], help="fit a flow at one initial point")
    p.add_argument("dataset")
    p.add_argument("--z", type=float, nargs="+", required=True)
    p.add_argument("--epsilon", type=_positive(float), default=None)
    p.add_argument("--family", choices=["spline", "realnvp"], default=None)
    p.add_argument("--history", help="loss history CSV path")
    p.add_argument("-o", "--output", required=True)
    _train_args(p)

    p = sub.add_parser("reproduce-paper", parents=[common],
                       help="rerun the 1D and 2D experiments end to end")
    p.add_argument("-o", "--output", default="reproduction")
    p.add_argument("--density-points-1d", type=int, default=5)
    p.add_argument("--density-points-2d", type=int, default=3)
    p.add_argument("--save-datasets", action="store_true")
    _train_args(p)
    return parser


def _apply_config_file(parser, argv):
    """Load ``--config`` JSON into parser defaults so explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    try:
        with open(known.config) as fh:
            conf = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config file: {exc}")
    if not isinstance(conf, dict):
        parser.error("config file must hold a JSON object")
    flat = {k.replace("-", "_"): v for k, v in conf.items() if not isinstance(v, dict)}
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in sub_action.choices.items():
        section = {k.replace("-", "_"): v for k, v in conf.get(name, {}).items()}
        known_dests = {a.dest for a in sp._actions}
        values = {k: v for k, v in {**flat, **section}.items() if k in known_dests}
        sp.set_defaults(**values)
        for action in sp._actions:
            if action.dest in values:
                action.required = False
    return conf


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    print(text)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _effective(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}


def cmd_simulate(args):
    dim = systems.BUILTIN_DIMS.get(args.system, args.dim or 1)
    if args.dim is not None and args.dim != dim:
        raise SystemExit(_usage(f"system {args.system} is {dim}-dimensional"))
    if args.system == "poly" and not args.coeffs:
        raise SystemExit(_usage("--system poly needs --coeffs"))
    drift = systems.get_drift(args.system, args.coeffs)
    model = SdeModel(drift, StableParams(args.alpha, args.sigma, dim))
    grid = default_grid(dim, args.grid_points)
    cfg = SimConfig(grid, args.n, args.dt, args.seed, args.threads)
    ds = simulate_burst(model, cfg, args.tstar)
    ds.metadata.update({"system": args.system, "alpha": args.alpha, "sigma": args.sigma})
    save_dataset(ds, args.output)
    print(f"wrote {len(ds)} records to {args.output}", file=sys.stderr)


def cmd_estimate_levy(args):
    ds = load_dataset(args.dataset)
    if args.per_z:
        per = estimate_levy_per_z(ds)
        report = {"per_z": [{"z": list(k), **v.to_dict()} for k, v in per.items()],
                  "config": _effective(args)}
    else:
        report = {**estimate_levy(ds).to_dict(), "config": _effective(args)}
    _emit(report, args.output)


def _query_points(ds, count):
    keys, _ = ds.initial_points()
    if count is None or count >= len(keys):
        return keys
    pick = np.unique(np.round(np.linspace(0, len(keys) - 1, count)).astype(int))
    return keys[pick]


def cmd_estimate_drift(args):
    ds = load_dataset(args.dataset)
    eps = args.epsilon if args.epsilon is not None else default_epsilon(ds.dim)
    points = _query_points(ds, args.points)
    if args.method == "direct":
        fld = estimate_drift_field(ds, points, eps, ds.t_star, "direct", nearest=args.nearest,
                                   threads=args.threads)
    else:
        values, flags = [], []
        if args.model_dir:
            os.makedirs(args.model_dir, exist_ok=True)
        for i, z in enumerate(points):
            try:
                value, model, _ = estimate_drift_flow(ds, z, eps, train_config=_train_config(args),
                                                      nearest=args.nearest)
                if args.model_dir:
                    save_model(model, os.path.join(args.model_dir, f"flow_{i:04d}.json"))
                flags.append("")
            except LevyExtractError as exc:
                value = np.full(ds.dim, np.nan)
                flags.append(type(exc).__name__)
            values.append(value)
        fld = DriftField(points, np.array(values), "density", flags)
    save_field(fld, args.output)
    report = {"points": len(fld), "epsilon": eps, "method": args.method,
              "gaps": sum(1 for f in fld.flags if f), "config": _effective(args)}
    if args.system:
        truth = systems.get_drift(args.system)
        if truth is not None and ds.dim == systems.BUILTIN_DIMS[args.system]:
            report["rmse"] = fld.rmse(truth)
            if args.plot:
                _plot_field(fld, truth, args.plot, args.system)
                np.savetxt(args.plot + ".csv",
                           np.hstack([fld.grid, fld.values, truth(fld.grid)]),
                           delimiter=",", fmt="%.17g", comments="",
                           header=",".join([f"z_{i + 1}" for i in range(ds.dim)]
                                           + [f"b_{i + 1}" for i in range(ds.dim)]
                                           + [f"true_{i + 1}" for i in range(ds.dim)]))
    _emit(report)


def _plot_field(fld, truth, path, name):
    if fld.grid.shape[1] == 1:
        fine = np.linspace(fld.grid.min(), fld.grid.max(), 201)
        line_chart([{"x": fine, "y": truth(fine.reshape(-1, 1))[:, 0], "label": "true drift"},
                    {"x": fld.grid[:, 0], "y": fld.values[:, 0], "label": f"{fld.method_tag} estimate",
                     "style": "points"}], path, f"{name}: drift", "x", "b(x)")
    else:
        t = truth(fld.grid)
        series = [{"x": t[:, c], "y": fld.values[:, c], "label": f"b{c + 1}", "style": "points"}
                  for c in range(fld.grid.shape[1])]
        line_chart(series, path, f"{name}: estimated vs true drift", "true", "estimated")


def cmd_train_flow(args):
    ds = load_dataset(args.dataset)
    eps = args.epsilon if args.epsilon is not None else default_epsilon(ds.dim)
    model, history, prob = fit_ball_flow(ds, np.array(args.z), eps, args.family,
                                         _train_config(args))
    save_model(model, args.output)
    if args.history:
        history.to_csv(args.history)
    _emit({"ball_probability": prob, "final_train_nll": history.train_nll[-1],
           "n_params": model.n_params, "config": _effective(args)})


def cmd_reproduce(args):
    from .reproduce import ReproduceConfig, run_reproduction

    cfg = ReproduceConfig(seed=args.seed, threads=args.threads,
                          density_points_1d=args.density_points_1d,
                          density_points_2d=args.density_points_2d,
                          save_datasets=args.save_datasets, train=_train_config(args))
    summary = run_reproduction(cfg, args.output)
    rows = {k: {q: summary[k]["levy"][q] for q in ("alpha_hat", "sigma_hat")}
            for k in ("ex1", "ex2")}
    _emit({"output": args.output, "estimates": rows})


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate-levy": cmd_estimate_levy,
    "estimate-drift": cmd_estimate_drift,
    "train-flow": cmd_train_flow,
    "reproduce-paper": cmd_reproduce,
}


def _usage(message):
    print(f"levy-extract: error: {message}", file=sys.stderr)
    return 2


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except (LevyExtractError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
