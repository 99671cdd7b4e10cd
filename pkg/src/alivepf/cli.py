"""Command-line entry points.

Subcommands:
  filter      one alive / lgo / standard filter run on a linear-Gaussian
              ABC model, writing a per-step CSV and a JSON manifest
  experiment  a named experiment from a JSON config file
  pmmh        shorthand for the PMMH experiments
  identities  shorthand for the identities experiment

Exit codes: 0 success, 2 bad configuration, 3 a single requested run died
(trial cap exceeded or chain initialization failed). Batch experiments
record per-replicate events in their manifest instead of failing.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .alive import filter_estimate, run_filter
from .baseline import run_standard_filter, baseline_filter_estimate
from .errors import CapExceeded, ConfigError, InitFailed
from .experiments import run_experiment, write_csv
from .models import (
    LinearGaussianParams,
    compile_abc_hmm,
    latent_values,
    lg_abc_hmm,
    lg_simulate,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alivepf",
        description="Alive particle filter experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("filter", help="run one filter on a linear-Gaussian ABC model")
    run.add_argument("--horizon", type=int, default=100)
    run.add_argument("--n-alive", type=int, default=500,
                     help="alive target (or particle count for --variant standard)")
    run.add_argument("--epsilon", type=float, default=5.0)
    run.add_argument("--variant", choices=("alive", "lgo", "standard"), default="alive")
    run.add_argument("--sigma-v2", type=float, default=1.0)
    run.add_argument("--sigma-w2", type=float, default=1.0)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--data-seed", type=int, default=0)
    run.add_argument("--cap", type=int, default=10_000_000)
    run.add_argument("--out", required=True, help="output directory")

    exp = sub.add_parser("experiment", help="run a named experiment from a config file")
    exp.add_argument("--config", required=True, help="JSON config file")
    exp.add_argument("--seed", type=int, default=None, help="override the config seed")
    exp.add_argument("--replicates", type=int, default=None,
                     help="override the config replicate count")
    exp.add_argument("--out", required=True)

    pmmh = sub.add_parser("pmmh", help="run a PMMH experiment from a config file")
    pmmh.add_argument("--config", required=True, help="JSON config file")
    pmmh.add_argument("--seed", type=int, default=None)
    pmmh.add_argument("--out", required=True)

    ident = sub.add_parser("identities", help="run the stopping-time identities table")
    ident.add_argument("--replicates", type=int, default=None)
    ident.add_argument("--seed", type=int, default=None)
    ident.add_argument("--out", required=True)
    return parser


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return raw


def _run_single_filter(args) -> int:
    if args.sigma_v2 <= 0 or args.sigma_w2 <= 0:
        raise ConfigError("--sigma-v2 and --sigma-w2 must be positive")
    if args.horizon < 1:
        raise ConfigError("--horizon must be >= 1")
    if args.epsilon <= 0:
        raise ConfigError("--epsilon must be positive")
    minimum = 1 if args.variant == "standard" else 2
    if args.n_alive < minimum:
        raise ConfigError(f"--n-alive must be >= {minimum} for --variant {args.variant}")
    params = LinearGaussianParams(sigma_v2=args.sigma_v2, sigma_w2=args.sigma_w2)
    z_true, y = lg_simulate(params, args.horizon, args.data_seed)
    model = compile_abc_hmm(lg_abc_hmm(params, y, args.epsilon), {})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "family": "filter_run", "variant": args.variant, "seed": args.seed,
        "epsilon": args.epsilon, "sigma_v2": args.sigma_v2,
        "sigma_w2": args.sigma_w2, "horizon": args.horizon,
    }
    steps = np.arange(1, args.horizon + 1)
    if args.variant == "standard":
        run = run_standard_filter(model, n_particles=args.n_alive, seed=args.seed)
        counts = np.full(args.horizon, np.nan)
        means = np.full(args.horizon, np.nan)
        for step in run.steps:
            counts[step.time - 1] = step.alive_count
            if step.alive_count > 0:
                means[step.time - 1] = baseline_filter_estimate(step, latent_values)
        write_csv(out / "filter_run.csv", meta,
                  ["step", "alive_count", "filter_mean", "true_latent"],
                  zip(steps, counts, means, z_true))
        manifest = {
            "variant": "standard", "n_particles": args.n_alive,
            "collapsed": run.collapsed,
            "collapse_step": run.collapse.step if run.collapse else None,
        }
    else:
        run = run_filter(model, n_alive=args.n_alive, trial_cap=args.cap,
                         seed=args.seed, variant=args.variant)
        means = np.array([filter_estimate(step, latent_values) for step in run.steps])
        stopping = np.array(run.stopping_times, dtype=float)
        write_csv(out / "filter_run.csv", meta,
                  ["step", "stopping_time", "filter_mean", "true_latent"],
                  zip(steps, stopping, means, z_true))
        manifest = {
            "variant": args.variant, "n_alive": args.n_alive,
            "log_gamma": run.log_gamma,
            "log_gamma_all_steps": run.log_gamma_all_steps,
            "total_trials": run.total_trials,
            "seed_manifest": run.seed_manifest,
        }
    with open(out / "filter_run_manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "filter":
            return _run_single_filter(args)
        if args.command == "experiment":
            raw = _load_config(args.config)
            if args.seed is not None:
                raw["seed"] = args.seed
            if args.replicates is not None:
                raw["replicates"] = args.replicates
            run_experiment(raw, args.out)
            return 0
        if args.command == "pmmh":
            raw = _load_config(args.config)
            if args.seed is not None:
                raw["seed"] = args.seed
            experiment = raw.get("experiment")
            if experiment not in ("pmmh_sv", "pmmh_lg_validation"):
                raise ConfigError(
                    "pmmh expects a config with experiment pmmh_sv or pmmh_lg_validation"
                )
            run_experiment(raw, args.out)
            return 0
        if args.command == "identities":
            raw = {"experiment": "identities"}
            if args.replicates is not None:
                raw["replicates"] = args.replicates
            if args.seed is not None:
                raw["seed"] = args.seed
            run_experiment(raw, args.out)
            return 0
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except CapExceeded as err:
        print(f"error: trial cap exceeded at step {err.step} "
              f"after {err.trials} draws", file=sys.stderr)
        return 3
    except InitFailed as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
