"""Command line: ridgelab run | theory | validate."""
from __future__ import annotations

import argparse
import json
import math
import sys

from ..errors import ConfigError
from ..linkfn import LinkFunction
from .config import ExperimentConfig
from .runner import run_experiment, theory_curves


def _link_from_arg(name: str, p: float) -> LinkFunction:
    if name == "identity":
        return LinkFunction.identity()
    if name == "cubic":
        return LinkFunction.cubic()
    if name == "abs_power":
        return LinkFunction.abs_power(p)
    if name == "signed_power":
        return LinkFunction.signed_power(int(p))
    raise SystemExit(f"unknown link {name!r}")


def _load(path) -> ExperimentConfig:
    try:
        return ExperimentConfig.load(path)
    except FileNotFoundError:
        raise ConfigError({"<file>": f"no such file: {path}"})


def _report_config_error(exc: ConfigError) -> int:
    print("config error:", file=sys.stderr)
    for k, v in exc.errors.items():
        print(f"  {k}: {v}", file=sys.stderr)
    return 2


def cmd_run(args) -> int:
    try:
        cfg = _load(args.config)
    except ConfigError as exc:
        return _report_config_error(exc)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    records, summary = run_experiment(cfg, workers=args.workers)
    print(json.dumps({"records": len(records), "output_dir": cfg.output_dir,
                      "fitted_slope": summary.get("fitted_slope")}))
    return 0


def cmd_validate(args) -> int:
    try:
        _load(args.config)
    except ConfigError as exc:
        return _report_config_error(exc)
    print("ok")
    return 0


def cmd_theory(args) -> int:
    link = _link_from_arg(args.link, args.p)
    lb, ub = theory_curves(link, args.d, args.c, args.delta, args.t_max)
    lb.write_csv(args.out)
    ub.write_csv(args.out, header=False, mode="a")
    print(json.dumps({"lb_crossing_half": lb.crossing, "ub_crossing_half": ub.crossing, "out": args.out}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ridgelab", description="Ridge bandit simulations and bound curves.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("--output-dir", default=None, help="override output_dir from the config")
    r.add_argument("--workers", type=int, default=None, help="worker processes (default: RIDGELAB_THREADS or CPU count)")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    t = sub.add_parser("theory", help="write lower/upper-bound trajectories as CSV")
    t.add_argument("--link", default="cubic", choices=["identity", "cubic", "abs_power", "signed_power"])
    t.add_argument("--p", type=float, default=3.0, help="power for abs_power / signed_power")
    t.add_argument("--d", type=int, required=True)
    t.add_argument("--c", type=float, default=1.0, help="absolute constant in the bounds")
    t.add_argument("--delta", type=float, default=math.exp(-1.0))
    t.add_argument("--t-max", type=int, default=10**13)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_theory)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
