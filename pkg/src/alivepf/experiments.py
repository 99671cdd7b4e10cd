"""Config-driven experiment runner emitting figure-ready CSV files.

Each experiment id has desk-scale defaults that a config mapping may
override. Every emitted CSV starts with a ``# key=value ...`` metadata line
(experiment id, figure family, seed, config hash, declared row count), then
a header row, then the data. Values use '.' decimals and floats are written
with repr so reruns are byte-identical. Wall-clock times live only in the
JSON manifest, which is the one output allowed to differ between reruns.

Replicates use seeds derived from the master seed by replicate index, so
aggregation does not depend on execution order.
"""

from __future__ import annotations

import hashlib
import json
import math
import time as _time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .alive import run_filter, filter_estimate
from .baseline import run_standard_filter, baseline_filter_estimate
from .errors import CapExceeded, ConfigError
from .fk_core import FeynmanKacModel
from .models import (
    LinearGaussianParams,
    StableSvParams,
    inject_outliers,
    latent_values,
    lg_abc_hmm,
    lg_family_hmm,
    lg_simulate,
    sv_abc_hmm,
    sv_simulate,
    compile_abc_hmm,
)
from .oracles import (
    grid_abc_posterior,
    kalman_filter,
    nb_identity_exact,
    nb_identity_mc,
    nb_pair_identity_exact,
    nb_pair_identity_mc,
)
from .pmmh import (
    GammaProposal,
    GridPrior,
    GridProposal,
    InverseGammaPrior,
    NormalPrior,
    RandomWalkProposal,
    run_chain,
    write_trace_csv,
)

EXPERIMENT_DEFAULTS = {
    "lg_filtering_part1": {
        "seed": 1,
        "data_seed": 2995,
        "outlier_seed": 65,
        "replicates": 50,
        "horizon": 500,
        "n_alive": 1500,
        "n_standard": 2000,
        "trial_cap": 10_000_000,
        "variances": [[1.0, 1.0]],
        "epsilons": [5.0, 10.0, 15.0],
        "outlier_prob": 0.002,
        "outlier_levels": [80.0, 90.0, 100.0, 110.0, 120.0, 130.0, 140.0, 150.0],
    },
    "lg_filtering_part2": {
        "seed": 2,
        "data_seed": 35,
        "outlier_seed": 192,
        "replicates": 50,
        "horizon": 500,
        "n_alive": 1500,
        "n_standard": 2000,
        "trial_cap": 10_000_000,
        "variances": [[5.0, 5.0]],
        "epsilons": [3.0, 6.0, 12.0],
        "outlier_prob": 0.002,
        "outlier_levels": [80.0, 90.0, 100.0, 110.0, 120.0, 130.0, 140.0, 150.0],
    },
    "nc_variance": {
        "seed": 3,
        "replicates": 1000,
        "p0": 0.5,
        "n_grid": [5, 10, 20],
        "alive_multiplier": 10.0,
        "trial_cap": 10_000_000,
    },
    "identities": {
        "seed": 4,
        "replicates": 1_000_000,
        "single_p": [0.2, 0.5, 0.8],
        "single_n": [2, 5, 20],
        "pair_p": [0.3, 0.5],
        "pair_n": [3, 10],
    },
    "pmmh_lg_validation": {
        "seed": 5,
        "data_seed": 7,
        "horizon": 3,
        "sigma_v2_true": 1.0,
        "sigma_w2": 1.0,
        "epsilon": 1.0,
        "grid": [0.25, 0.5, 1.0, 2.0, 4.0],
        "n_alive": 20,
        "iterations": 20_000,
        "trial_cap": 10_000_000,
        "latent_grid": 400,
    },
    "pmmh_sv": {
        "seed": 6,
        "data_seed": 42,
        "horizon": 200,
        "xi1": 1.0,
        "xi2": 1.0,
        "xi3": 1.75,
        "true_beta": 1.0,
        "true_c": 0.01,
        "true_phi": 0.02,
        "epsilon": 2.0,
        "n_alive": 30,
        "iterations": 2000,
        "trial_cap": 100_000,
        "beta_prior_variance": 10.0,
        "c_prior": [2.0, 0.01],
        "phi_prior": [2.0, 0.02],
        "beta_step_variance": 0.04,
        "c_step_variance": 6.25e-6,
        "phi_step_variance": 2.5e-5,
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment: id plus its settings mapping."""

    experiment: str
    settings: dict

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ExperimentConfig":
        if "experiment" not in raw:
            raise ConfigError("config must name an 'experiment'")
        experiment = raw["experiment"]
        if experiment not in EXPERIMENT_DEFAULTS:
            raise ConfigError(
                f"unknown experiment {experiment!r}; "
                f"known: {sorted(EXPERIMENT_DEFAULTS)}"
            )
        defaults = EXPERIMENT_DEFAULTS[experiment]
        settings = dict(defaults)
        for key, value in raw.items():
            if key == "experiment":
                continue
            if key not in defaults:
                raise ConfigError(f"unknown setting {key!r} for experiment {experiment!r}")
            settings[key] = value
        cls._validate(experiment, settings)
        return cls(experiment=experiment, settings=settings)

    @staticmethod
    def _validate(experiment: str, settings: Mapping) -> None:
        def positive_int(key):
            value = settings[key]
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{key} must be a positive integer")

        for key in ("seed",):
            if not isinstance(settings[key], int):
                raise ConfigError(f"{key} must be an integer")
        if "replicates" in settings:
            positive_int("replicates")
        if "horizon" in settings:
            positive_int("horizon")
        if "iterations" in settings:
            positive_int("iterations")
        if "n_alive" in settings and settings["n_alive"] < 2:
            raise ConfigError("n_alive must be >= 2")
        if "epsilons" in settings:
            eps = settings["epsilons"]
            if not eps or any(not e > 0 for e in eps):
                raise ConfigError("epsilons must be a nonempty list of positive values")
        if "epsilon" in settings and not settings["epsilon"] > 0:
            raise ConfigError("epsilon must be positive")

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(
            {"experiment": self.experiment, **self.settings},
            sort_keys=True, separators=(",", ":"),
        )
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def _meta_value(value) -> str:
    if isinstance(value, (list, tuple, np.ndarray)):
        return ";".join(_meta_value(v) for v in value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, meta: Mapping, header: Sequence[str], rows) -> None:
    """Emit one CSV: '# key=value' metadata line, header, then rows."""
    rows = list(rows)
    pairs = dict(meta)
    pairs["rows"] = len(rows)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write("# " + " ".join(f"{k}={_meta_value(v)}" for k, v in pairs.items()) + "\n")
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_format_cell(cell) for cell in row) + "\n")


# ---------------------------------------------------------------------------
# shared building blocks

def uniform_indicator_model(p0: float, horizon: int) -> FeynmanKacModel:
    """State-forgetting model: every kernel draws U[0, 1], the potential is
    the indicator of [0, p0). All per-step laws are known in closed form,
    which makes this the workhorse of the analytic checks."""
    if not 0 < p0 < 1:
        raise ValueError("p0 must lie strictly between 0 and 1")

    def kernel(p, states, rng):
        return rng.random((states.shape[0], 1))

    def potential(p, states):
        return states[:, 0] < p0

    return FeynmanKacModel(
        initial_point=np.array([0.5]),
        horizon=horizon,
        kernel_sampler=kernel,
        potential=potential,
    )


def _replicate_seed(master: int, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master, spawn_key=tuple(int(k) for k in key))


@dataclass
class AliveReplicate:
    stopping_times: np.ndarray  # (horizon,) float, nan after a capped step
    filter_means: np.ndarray    # (horizon,)
    log_factors: np.ndarray     # (horizon,) log((N-1)/(T_p-1)) per completed step
    capped_step: Optional[int]

    @property
    def log_nc(self) -> np.ndarray:
        """Running log normalizing-constant estimate, row p holds the product
        of the first p - 1 factors (so the first entry is 0)."""
        partial = np.concatenate(([0.0], np.cumsum(self.log_factors)[:-1]))
        return partial


def run_alive_replicate(model: FeynmanKacModel, n_alive: int, trial_cap: int,
                        seed, variant: str = "alive") -> AliveReplicate:
    horizon = model.horizon
    capped_step = None
    try:
        run = run_filter(model, n_alive=n_alive, trial_cap=trial_cap,
                         seed=seed, variant=variant, lean=True)
    except CapExceeded as err:
        run = err.partial_run
        capped_step = err.step
    stopping = np.full(horizon, np.nan)
    means = np.full(horizon, np.nan)
    factors = np.full(horizon, np.nan)
    for step in run.steps:
        index = step.time - 1
        stopping[index] = step.stopping_time
        means[index] = filter_estimate(step, latent_values)
        factors[index] = math.log((n_alive - 1) / (step.stopping_time - 1))
    return AliveReplicate(
        stopping_times=stopping,
        filter_means=means,
        log_factors=factors,
        capped_step=capped_step,
    )


@dataclass
class StandardReplicate:
    alive_counts: np.ndarray  # (horizon,) float, nan after the collapse step
    filter_means: np.ndarray
    log_factors: np.ndarray   # log(alive/n) per step; nan at and after collapse
    collapse_step: Optional[int]

    @property
    def log_nc(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.log_factors)[:-1]))


def run_standard_replicate(model: FeynmanKacModel, n_particles: int, seed) -> StandardReplicate:
    horizon = model.horizon
    run = run_standard_filter(model, n_particles=n_particles, seed=seed, store_states=False)
    counts = np.full(horizon, np.nan)
    means = np.full(horizon, np.nan)
    factors = np.full(horizon, np.nan)
    for step in run.steps:
        index = step.time - 1
        counts[index] = step.alive_count
        if step.alive_count > 0:
            means[index] = baseline_filter_estimate(step, latent_values)
            factors[index] = math.log(step.alive_count / n_particles)
    collapse_step = run.collapse.step if run.collapse is not None else None
    return StandardReplicate(
        alive_counts=counts,
        filter_means=means,
        log_factors=factors,
        collapse_step=collapse_step,
    )


@dataclass(frozen=True)
class RelativeVarianceReport:
    """Per-step sample variance of (estimate / reference), log domain.

    ``log_variance`` is log Var_r(gamma_hat_p / reference_p); the variance is
    computed after shifting each step's log ratios by their maximum, so the
    exponentials stay in range. ``jackknife_se_log`` is the leave-one-out
    standard error mapped to the log scale (se / variance).
    """

    log_variance: np.ndarray
    jackknife_se_log: np.ndarray
    replicate_counts: np.ndarray

    @property
    def variance(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_variance)


def _runs_to_log_nc(runs, horizon: int) -> np.ndarray:
    matrix = np.full((len(runs), horizon), np.nan)
    for row, run in enumerate(runs):
        factors = np.full(horizon, np.nan)
        for step in run.steps:
            factors[step.time - 1] = math.log(
                (run.n_alive - 1) / (step.stopping_time - 1))
        matrix[row] = np.concatenate(([0.0], np.cumsum(factors)[:-1]))
    return matrix


def relative_variance_report(runs, reference_log: np.ndarray) -> RelativeVarianceReport:
    """Column-wise relative variance of exp(log_nc - reference).

    ``runs`` is either a sequence of FilterRun objects or a prebuilt
    (replicates, horizon) array of running log normalizing-constant
    estimates. Rows are replicates; nan entries (capped replicates) are
    dropped per column. Columns with fewer than two finite entries report
    nan; at least two replicates are required.
    """
    reference = np.asarray(reference_log, dtype=float).ravel()
    if not isinstance(runs, np.ndarray) and len(runs) and hasattr(runs[0], "steps"):
        matrix = _runs_to_log_nc(runs, reference.size)
    else:
        matrix = np.asarray(runs, dtype=float)
    if matrix.shape[0] < 2:
        raise ValueError("need at least two replicates")
    if matrix.ndim != 2 or matrix.shape[1] != reference.size:
        raise ValueError("runs must give a (replicates, len(reference)) array")
    horizon = reference.size
    log_var = np.full(horizon, np.nan)
    se_log = np.full(horizon, np.nan)
    counts = np.zeros(horizon, dtype=np.int64)
    for p in range(horizon):
        column = matrix[:, p] - reference[p]
        column = column[np.isfinite(column)]
        r = column.size
        counts[p] = r
        if r < 2:
            continue
        shift = column.max()
        x = np.exp(column - shift)
        s1 = x.sum()
        s2 = (x * x).sum()
        var = (s2 - s1 * s1 / r) / (r - 1)
        if var <= 0:
            log_var[p] = -math.inf
            se_log[p] = 0.0
            continue
        log_var[p] = math.log(var) + 2.0 * shift
        if r >= 3:
            s1_i = s1 - x
            s2_i = s2 - x * x
            var_i = (s2_i - s1_i * s1_i / (r - 1)) / (r - 2)
            se_shifted = math.sqrt((r - 1) / r * ((var_i - var_i.mean()) ** 2).sum())
            se_log[p] = se_shifted / var
    return RelativeVarianceReport(
        log_variance=log_var,
        jackknife_se_log=se_log,
        replicate_counts=counts,
    )


def _nanmean(matrix: np.ndarray, axis: int = 0) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.nanmean(matrix, axis=axis)


# ---------------------------------------------------------------------------
# linear-Gaussian filtering experiments (parts 1 and 2)

def _lg_filtering(config: ExperimentConfig, out_dir: Path, part: int) -> dict:
    s = config.settings
    master = s["seed"]
    horizon = s["horizon"]
    replicates = s["replicates"]
    files = []
    events = {"alive_cap": [], "standard_collapse": []}
    outlier_record = {}
    for vi, (sigma_v2, sigma_w2) in enumerate(s["variances"]):
        params = LinearGaussianParams(sigma_v2=float(sigma_v2), sigma_w2=float(sigma_w2))
        z_true, y_clean = lg_simulate(params, horizon, s["data_seed"])
        injected = inject_outliers(
            y_clean, s["outlier_prob"], s["outlier_levels"],
            seed=s["outlier_seed"],
        )
        y = injected.observations
        outlier_record[f"v{vi}"] = [int(i) for i in injected.indices]
        kalman = kalman_filter(params, y)
        kalman_cumulative = np.cumsum(kalman.loglik_increments)
        for ei, epsilon in enumerate(s["epsilons"]):
            epsilon = float(epsilon)
            hmm = lg_abc_hmm(params, y, epsilon)
            model = compile_abc_hmm(hmm, {})
            alive_reps = []
            standard_reps = []
            for r in range(replicates):
                alive = run_alive_replicate(
                    model, s["n_alive"], s["trial_cap"],
                    _replicate_seed(master, vi, ei, r, 0),
                )
                if alive.capped_step is not None:
                    events["alive_cap"].append(
                        {"variance_index": vi, "epsilon": epsilon,
                         "replicate": r, "step": alive.capped_step}
                    )
                alive_reps.append(alive)
                standard = run_standard_replicate(
                    model, s["n_standard"], _replicate_seed(master, vi, ei, r, 1),
                )
                if standard.collapse_step is not None:
                    events["standard_collapse"].append(
                        {"variance_index": vi, "epsilon": epsilon,
                         "replicate": r, "step": standard.collapse_step}
                    )
                standard_reps.append(standard)

            alive_means = np.vstack([rep.filter_means for rep in alive_reps])
            standard_means = np.vstack([rep.filter_means for rep in standard_reps])
            alive_lognc = np.vstack([rep.log_nc for rep in alive_reps])
            standard_lognc = np.vstack([rep.log_nc for rep in standard_reps])
            alive_stopping = np.vstack([rep.stopping_times for rep in alive_reps])
            standard_counts = np.vstack([rep.alive_counts for rep in standard_reps])

            alive_l1 = _nanmean(np.abs(alive_means - kalman.filtered_mean))
            standard_l1 = _nanmean(np.abs(standard_means - kalman.filtered_mean))
            with np.errstate(divide="ignore", invalid="ignore"):
                log_ratio = np.log(alive_l1 / standard_l1)

            steps = np.arange(1, horizon + 1)
            base_meta = {
                "experiment": config.experiment,
                "seed": master,
                "config_hash": config.config_hash,
                "sigma_v2": sigma_v2,
                "sigma_w2": sigma_w2,
                "epsilon": epsilon,
                "n_alive": s["n_alive"],
                "n_standard": s["n_standard"],
            }
            tag = f"v{vi}_e{ei}"

            ratio_name = ("fig1" if part == 1 else "fig8") + f"_error_ratio_{tag}.csv"
            write_csv(
                out_dir / ratio_name,
                {**base_meta, "family": "error_ratio"},
                ["step", "alive_l1", "standard_l1", "log_error_ratio"],
                zip(steps, alive_l1, standard_l1, log_ratio),
            )
            files.append(ratio_name)

            if part == 1:
                abs_name = f"fig2_abs_error_{tag}.csv"
                write_csv(
                    out_dir / abs_name,
                    {**base_meta, "family": "abs_error",
                     "outliers": [int(i) for i in injected.indices]},
                    ["step", "abs_error"],
                    zip(steps, alive_l1),
                )
                files.append(abs_name)

                # exact-likelihood comparator: the ABC estimate is biased
                # relative to it, hence the eps0 labeling
                volume = math.log(2.0 * epsilon)
                eps0_reference = np.concatenate(([0.0], kalman_cumulative[:-1])) \
                    + volume * np.arange(horizon)
                nc_name = f"fig3_nc_trajectory_{tag}.csv"
                write_csv(
                    out_dir / nc_name,
                    {**base_meta, "family": "nc_trajectory"},
                    ["step", "eps0_reference", "alive_log_nc", "standard_log_nc"],
                    zip(steps, eps0_reference, _nanmean(alive_lognc),
                        _nanmean(standard_lognc)),
                )
                files.append(nc_name)

                report = relative_variance_report(alive_lognc, eps0_reference)
                relvar_name = f"fig4_nc_relvar_{tag}.csv"
                write_csv(
                    out_dir / relvar_name,
                    {**base_meta, "family": "nc_relvar"},
                    ["step", "log_rel_variance", "jackknife_se_log", "replicates"],
                    zip(steps, report.log_variance, report.jackknife_se_log,
                        report.replicate_counts),
                )
                files.append(relvar_name)

                alive_counts_name = f"fig5_particle_counts_{tag}.csv"
                write_csv(
                    out_dir / alive_counts_name,
                    {**base_meta, "family": "particle_counts", "series": "alive_trials"},
                    ["step", "mean_count", "min_count", "max_count"],
                    zip(steps, _nanmean(alive_stopping),
                        np.nanmin(alive_stopping, axis=0),
                        np.nanmax(alive_stopping, axis=0)),
                )
                files.append(alive_counts_name)

                standard_counts_name = f"fig6_particle_counts_{tag}.csv"
                write_csv(
                    out_dir / standard_counts_name,
                    {**base_meta, "family": "particle_counts", "series": "standard_alive"},
                    ["step", "mean_count", "min_count", "max_count"],
                    zip(steps, _nanmean(standard_counts),
                        np.nanmin(standard_counts, axis=0),
                        np.nanmax(standard_counts, axis=0)),
                )
                files.append(standard_counts_name)
            else:
                traj_name = f"fig7_state_trajectory_{tag}.csv"
                write_csv(
                    out_dir / traj_name,
                    {**base_meta, "family": "state_trajectory",
                     "outliers": [int(i) for i in injected.indices]},
                    ["step", "true_latent", "alive_mean", "standard_mean"],
                    zip(steps, z_true, _nanmean(alive_means), _nanmean(standard_means)),
                )
                files.append(traj_name)
    return {"files": files, "events": events, "outlier_indices": outlier_record}


# ---------------------------------------------------------------------------
# normalizing-constant variance scaling on the analytic model

def nc_relative_mse(p0: float, horizon: int, n_alive: int, replicates: int,
                    trial_cap: int, master_seed: int, key: int = 0) -> tuple:
    """Mean of (gamma_hat_n / gamma_n - 1)^2 over replicates, with its SE.

    gamma_hat_n is the product of the first horizon - 1 factors; the analytic
    value for the uniform indicator model is p0^(horizon - 1).
    """
    model = uniform_indicator_model(p0, horizon)
    values = np.empty(replicates)
    log_true = (horizon - 1) * math.log(p0)
    for r in range(replicates):
        run = run_filter(model, n_alive=n_alive, trial_cap=trial_cap,
                         seed=_replicate_seed(master_seed, key, r), lean=True)
        values[r] = (math.exp(run.log_gamma - log_true) - 1.0) ** 2
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(replicates))


def _nc_variance(config: ExperimentConfig, out_dir: Path) -> dict:
    s = config.settings
    p0 = float(s["p0"])
    files = []
    summary_rows = []
    for ni, horizon in enumerate(s["n_grid"]):
        horizon = int(horizon)
        n_alive = math.ceil(s["alive_multiplier"] * horizon / p0)
        model = uniform_indicator_model(p0, horizon)
        log_nc = np.empty((s["replicates"], horizon))
        rel_sq = np.empty(s["replicates"])
        log_true_final = (horizon - 1) * math.log(p0)
        for r in range(s["replicates"]):
            run = run_filter(model, n_alive=n_alive, trial_cap=s["trial_cap"],
                             seed=_replicate_seed(s["seed"], ni, r), lean=True)
            factors = np.array([
                math.log((n_alive - 1) / (step.stopping_time - 1)) for step in run.steps
            ])
            log_nc[r] = np.concatenate(([0.0], np.cumsum(factors)[:-1]))
            rel_sq[r] = (math.exp(run.log_gamma - log_true_final) - 1.0) ** 2
        reference = np.arange(horizon) * math.log(p0)
        report = relative_variance_report(log_nc, reference)
        name = f"nc_relvar_n{horizon}.csv"
        write_csv(
            out_dir / name,
            {"experiment": config.experiment, "family": "nc_relvar",
             "seed": s["seed"], "config_hash": config.config_hash,
             "p0": p0, "n": horizon, "n_alive": n_alive},
            ["step", "log_rel_variance", "jackknife_se_log", "replicates"],
            zip(np.arange(1, horizon + 1), report.log_variance,
                report.jackknife_se_log, report.replicate_counts),
        )
        files.append(name)
        summary_rows.append(
            (horizon, n_alive, float(rel_sq.mean()),
             float(rel_sq.std(ddof=1) / math.sqrt(s["replicates"]))),
        )
    name = "nc_scaling.csv"
    write_csv(
        out_dir / name,
        {"experiment": config.experiment, "family": "nc_scaling",
         "seed": s["seed"], "config_hash": config.config_hash, "p0": p0},
        ["n", "n_alive", "relative_mse", "std_error"],
        summary_rows,
    )
    files.append(name)
    return {"files": files, "events": {}}


# ---------------------------------------------------------------------------
# negative-binomial identities table

def _identities(config: ExperimentConfig, out_dir: Path) -> dict:
    s = config.settings
    rows = []
    index = 0
    for p in s["single_p"]:
        for n_success in s["single_n"]:
            estimate = nb_identity_mc(
                float(p), int(n_success), int(s["replicates"]),
                seed=_replicate_seed(s["seed"], 0, index),
            )
            rows.append((
                "single", float(p), int(n_success), estimate.mean,
                estimate.std_error, estimate.target,
                nb_identity_exact(float(p), int(n_success)),
                estimate.error_in_se,
            ))
            index += 1
    for p in s["pair_p"]:
        for n_success in s["pair_n"]:
            estimate = nb_pair_identity_mc(
                float(p), int(n_success), int(s["replicates"]),
                seed=_replicate_seed(s["seed"], 1, index),
            )
            rows.append((
                "pair", float(p), int(n_success), estimate.mean,
                estimate.std_error, estimate.target,
                nb_pair_identity_exact(float(p), int(n_success)),
                estimate.error_in_se,
            ))
            index += 1
    name = "identities.csv"
    write_csv(
        out_dir / name,
        {"experiment": config.experiment, "family": "identities_table",
         "seed": s["seed"], "config_hash": config.config_hash,
         "replicates": s["replicates"]},
        ["kind", "p", "n_success", "mc_mean", "std_error",
         "target", "exact_value", "error_in_se"],
        rows,
    )
    return {"files": [name], "events": {}}


# ---------------------------------------------------------------------------
# PMMH experiments

def _pmmh_lg_validation(config: ExperimentConfig, out_dir: Path) -> dict:
    s = config.settings
    params = LinearGaussianParams(sigma_v2=float(s["sigma_v2_true"]),
                                  sigma_w2=float(s["sigma_w2"]))
    _, y = lg_simulate(params, int(s["horizon"]), s["data_seed"])
    hmm = lg_family_hmm(y, float(s["epsilon"]), sigma_w2=float(s["sigma_w2"]))
    grid = tuple(float(g) for g in s["grid"])
    priors = {"sigma_v2": GridPrior(points=grid)}
    proposals = {"sigma_v2": GridProposal(points=grid)}
    record = run_chain(
        hmm, priors, proposals,
        iterations=int(s["iterations"]), n_alive=int(s["n_alive"]),
        trial_cap=int(s["trial_cap"]), seed=s["seed"],
    )
    oracle = grid_abc_posterior(
        grid, lambda v: LinearGaussianParams(sigma_v2=v, sigma_w2=float(s["sigma_w2"])),
        y, float(s["epsilon"]), latent_grid=int(s["latent_grid"]),
    )
    values = record.thetas[:, 0]
    frequencies = np.array([(values == g).mean() for g in grid])
    meta = {
        "experiment": config.experiment, "family": "pmmh_trace",
        "seed": s["seed"], "config_hash": config.config_hash,
        "n_alive": s["n_alive"],
    }
    trace_name = "pmmh_lg_trace.csv"
    write_trace_csv(record, out_dir / trace_name,
                    meta={"experiment": config.experiment,
                          "family": "pmmh_trace",
                          "config_hash": config.config_hash})
    posterior_name = "pmmh_lg_posterior.csv"
    write_csv(
        out_dir / posterior_name,
        {**meta, "family": "posterior_grid"},
        ["grid_point", "chain_frequency", "oracle_weight"],
        zip(grid, frequencies, oracle),
    )
    tv = 0.5 * float(np.abs(frequencies - oracle).sum())
    return {
        "files": [trace_name, posterior_name],
        "events": {"cap_exceeded": int(record.cap_exceeded.sum())},
        "total_variation": tv,
        "acceptance_rate": record.acceptance_rate,
    }


def sv_demo_components(settings: Mapping) -> tuple:
    """(hmm, priors, proposals) for the stochastic-volatility demo."""
    true_params = StableSvParams(
        beta=float(settings["true_beta"]), c=float(settings["true_c"]),
        phi=float(settings["true_phi"]), xi1=float(settings["xi1"]),
        xi2=float(settings["xi2"]), xi3=float(settings["xi3"]),
    )
    _, y = sv_simulate(true_params, int(settings["horizon"]), settings["data_seed"])
    hmm = sv_abc_hmm(y, float(settings["epsilon"]), xi1=float(settings["xi1"]),
                     xi2=float(settings["xi2"]), xi3=float(settings["xi3"]))
    priors = {
        "beta": NormalPrior(0.0, float(settings["beta_prior_variance"])),
        "c": InverseGammaPrior(*[float(v) for v in settings["c_prior"]]),
        "phi": InverseGammaPrior(*[float(v) for v in settings["phi_prior"]]),
    }
    proposals = {
        "beta": RandomWalkProposal(float(settings["beta_step_variance"])),
        "c": GammaProposal(float(settings["c_step_variance"])),
        "phi": GammaProposal(float(settings["phi_step_variance"])),
    }
    return hmm, priors, proposals


def _pmmh_sv(config: ExperimentConfig, out_dir: Path) -> dict:
    s = config.settings
    hmm, priors, proposals = sv_demo_components(s)
    record = run_chain(
        hmm, priors, proposals,
        iterations=int(s["iterations"]), n_alive=int(s["n_alive"]),
        trial_cap=int(s["trial_cap"]), seed=s["seed"],
    )
    trace_name = "pmmh_sv_trace.csv"
    write_trace_csv(record, out_dir / trace_name,
                    meta={"experiment": config.experiment,
                          "family": "pmmh_trace",
                          "config_hash": config.config_hash})
    distinct = np.unique(record.thetas, axis=0).shape[0]
    return {
        "files": [trace_name],
        "events": {"cap_exceeded": int(record.cap_exceeded.sum()),
                   "prior_rejected": int(record.prior_rejected.sum())},
        "acceptance_rate": record.acceptance_rate,
        "distinct_states": int(distinct),
        "mean_trials_per_iteration": record.mean_trials_per_iteration,
    }


# ---------------------------------------------------------------------------
# dispatch

def run_experiment(config, out_dir) -> dict:
    """Run one experiment and write its CSVs plus a JSON manifest.

    ``config`` may be an ExperimentConfig or a raw mapping. Returns the
    manifest dictionary (also written to ``<experiment>_manifest.json``).
    Per-replicate cap and collapse events are recorded in the manifest and
    never abort the batch.
    """
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_dict(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = _time.perf_counter()
    if config.experiment == "lg_filtering_part1":
        result = _lg_filtering(config, out, part=1)
    elif config.experiment == "lg_filtering_part2":
        result = _lg_filtering(config, out, part=2)
    elif config.experiment == "nc_variance":
        result = _nc_variance(config, out)
    elif config.experiment == "identities":
        result = _identities(config, out)
    elif config.experiment == "pmmh_lg_validation":
        result = _pmmh_lg_validation(config, out)
    elif config.experiment == "pmmh_sv":
        result = _pmmh_sv(config, out)
    else:  # pragma: no cover - from_dict already rejects unknown ids
        raise ConfigError(f"unknown experiment {config.experiment!r}")
    manifest = {
        "experiment": config.experiment,
        "config": {"experiment": config.experiment, **config.settings},
        "config_hash": config.config_hash,
        "seed": config.settings["seed"],
        "wall_time_s": _time.perf_counter() - started,
        **result,
    }
    with open(out / f"{config.experiment}_manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True, default=str)
        handle.write("\n")
    return manifest


def rerun_from_manifest(manifest_path, out_dir) -> dict:
    """Re-run an experiment from a manifest's recorded config."""
    with open(manifest_path, encoding="utf-8") as handle:
        manifest = json.load(handle)
    return run_experiment(manifest["config"], out_dir)
