"""Particle marginal Metropolis-Hastings driven by the alive filter.

The chain targets the parameter posterior of an ABC hidden Markov model.
Each proposal runs a fresh alive filter; the unbiased marginal-likelihood
estimate (all per-step factors included) stands in for the intractable
likelihood in the acceptance ratio. A state's stored estimate is the one
produced by the run that created it and is never recomputed at the current
point. Hitting the trial cap during a proposal's run counts as a rejection.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time as _time
from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

from .alive import run_filter, sample_leaf, ancestral_path
from .errors import CapExceeded, InitFailed
from .fk_core import Trajectory
from .models import AbcHmm, compile_abc_hmm

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence]


# ---------------------------------------------------------------------------
# priors

@dataclass(frozen=True)
class NormalPrior:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("variance must be positive")

    def sample(self, rng: np.random.Generator) -> float:
        return self.mean + math.sqrt(self.variance) * rng.standard_normal()

    def log_density(self, x: float) -> float:
        return -0.5 * (math.log(2.0 * math.pi * self.variance)
                       + (x - self.mean) ** 2 / self.variance)


@dataclass(frozen=True)
class InverseGammaPrior:
    """Inverse gamma with shape a and scale b; the mode sits at b / (a + 1)."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("shape and scale must be positive")

    @property
    def mode(self) -> float:
        return self.scale / (self.shape + 1.0)

    def sample(self, rng: np.random.Generator) -> float:
        return self.scale / rng.gamma(self.shape, 1.0)

    def log_density(self, x: float) -> float:
        if x <= 0:
            return -math.inf
        a, b = self.shape, self.scale
        return a * math.log(b) - math.lgamma(a) - (a + 1.0) * math.log(x) - b / x


@dataclass(frozen=True)
class GridPrior:
    """Uniform (or weighted) prior on a finite set of values."""

    points: tuple
    weights: Optional[tuple] = None

    def __post_init__(self):
        points = tuple(float(p) for p in self.points)
        if len(points) == 0:
            raise ValueError("points must be nonempty")
        object.__setattr__(self, "points", points)
        if self.weights is not None:
            weights = tuple(float(w) for w in self.weights)
            if len(weights) != len(points) or any(w < 0 for w in weights) or sum(weights) <= 0:
                raise ValueError("weights must be nonnegative and match points")
            total = sum(weights)
            object.__setattr__(self, "weights", tuple(w / total for w in weights))

    def sample(self, rng: np.random.Generator) -> float:
        probabilities = self.weights
        if probabilities is None:
            return self.points[rng.integers(0, len(self.points))]
        return self.points[rng.choice(len(self.points), p=probabilities)]

    def log_density(self, x: float) -> float:
        for i, point in enumerate(self.points):
            if x == point:
                weight = 1.0 / len(self.points) if self.weights is None else self.weights[i]
                return math.log(weight)
        return -math.inf


PriorSpec = Mapping[str, object]  # name -> prior with sample / log_density


def sample_prior(priors: PriorSpec, rng: np.random.Generator) -> dict:
    return {name: prior.sample(rng) for name, prior in priors.items()}


def log_prior_density(theta: Mapping[str, float], priors: PriorSpec) -> float:
    """Joint log prior; -inf as soon as one coordinate leaves its support."""
    total = 0.0
    for name, prior in priors.items():
        value = prior.log_density(theta[name])
        if value == -math.inf:
            return -math.inf
        total += value
    return total


# ---------------------------------------------------------------------------
# proposals

@dataclass(frozen=True)
class RandomWalkProposal:
    step_variance: float

    def __post_init__(self):
        if not self.step_variance > 0:
            raise ValueError("step_variance must be positive")

    def sample(self, current: float, rng: np.random.Generator) -> float:
        return current + math.sqrt(self.step_variance) * rng.standard_normal()

    def log_density(self, proposed: float, current: float) -> float:
        return -0.5 * (math.log(2.0 * math.pi * self.step_variance)
                       + (proposed - current) ** 2 / self.step_variance)


@dataclass(frozen=True)
class GammaProposal:
    """Gamma proposal whose mean equals the current point.

    Shape and scale are rematched at every call: shape = current^2 / v,
    scale = v / current, so the mean is the current value and the variance
    is ``step_variance``. Only usable on positive parameters.
    """

    step_variance: float

    def __post_init__(self):
        if not self.step_variance > 0:
            raise ValueError("step_variance must be positive")

    def _shape_scale(self, center: float) -> tuple:
        if center <= 0:
            raise ValueError("gamma proposal needs a positive current value")
        shape = center * center / self.step_variance
        scale = self.step_variance / center
        return shape, scale

    def sample(self, current: float, rng: np.random.Generator) -> float:
        shape, scale = self._shape_scale(current)
        return rng.gamma(shape, scale)

    def log_density(self, proposed: float, current: float) -> float:
        if proposed <= 0 or current <= 0:
            return -math.inf
        shape = current * current / self.step_variance
        scale = self.step_variance / current
        # A center tiny enough to underflow the shape is a point mass at 0
        # in the limit, so any positive move out of it has density zero.
        if shape <= 0 or not math.isfinite(shape) or not math.isfinite(scale):
            return -math.inf
        return ((shape - 1.0) * math.log(proposed) - proposed / scale
                - shape * math.log(scale) - math.lgamma(shape))


@dataclass(frozen=True)
class GridProposal:
    """Uniform proposal over the other points of a finite set (symmetric).

    Excluding the current point avoids self-moves, which always accept and
    only refresh the marginal estimate. A single-point grid degenerates to
    proposing that point.
    """

    points: tuple

    def __post_init__(self):
        points = tuple(float(p) for p in self.points)
        if len(points) == 0:
            raise ValueError("points must be nonempty")
        object.__setattr__(self, "points", points)

    def sample(self, current: float, rng: np.random.Generator) -> float:
        others = [p for p in self.points if p != current]
        if not others:
            return self.points[0]
        return others[rng.integers(0, len(others))]

    def log_density(self, proposed: float, current: float) -> float:
        others = [p for p in self.points if p != current]
        if not others:
            return 0.0
        if proposed == current:
            return -math.inf
        return -math.log(len(others))


ProposalSpec = Mapping[str, object]  # name -> proposal with sample / log_density


# ---------------------------------------------------------------------------
# chain machinery

@dataclass(frozen=True)
class ChainState:
    """Current chain position with the estimate and path of the run that set it."""

    theta: dict
    log_gamma_hat: float
    trajectory: Trajectory
    iteration: int
    accept_count: int
    run_seed: tuple  # spawn key reconstructing the filter run behind log_gamma_hat


@dataclass(frozen=True)
class StepRecord:
    proposed_theta: dict
    accepted: bool
    log_gamma_proposed: float  # nan when no filter run happened or it was capped
    trials: int                # kernel draws consumed by the proposal's run
    cap_exceeded: bool
    prior_rejected: bool


def _filter_seed(seed, iteration: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(iteration, 1))


def _mh_rng(seed, iteration: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(iteration, 0)))


def run_alive_filter_once(hmm: AbcHmm, theta: Mapping[str, float], n_alive: int,
                          trial_cap: int, seed) -> tuple:
    """One filter pass at theta; returns (run, log marginal estimate).

    Module-level seam so tests can substitute exact marginal values.
    """
    model = compile_abc_hmm(hmm, theta)
    run = run_filter(model, n_alive=n_alive, trial_cap=trial_cap, seed=seed)
    return run, run.log_gamma_all_steps


def pmmh_init(hmm: AbcHmm, priors: PriorSpec, n_alive: int,
              trial_cap: int, seed: SeedLike = 0, max_attempts: int = 100) -> ChainState:
    """Draw a starting point from the prior and attach its filter estimate.

    A draw whose filter run hits the trial cap is discarded and redrawn, up
    to ``max_attempts`` times; after that the initialisation fails.
    """
    rng = _mh_rng(seed, 0)
    for attempt in range(max_attempts):
        theta = sample_prior(priors, rng)
        try:
            run, log_gamma = run_alive_filter_once(
                hmm, theta, n_alive, trial_cap,
                np.random.SeedSequence(entropy=seed, spawn_key=(0, 1, attempt)),
            )
        except CapExceeded:
            logger.info("init attempt %d hit the trial cap; redrawing", attempt + 1)
            continue
        leaf = sample_leaf(run.steps[-1], rng)
        return ChainState(
            theta=theta,
            log_gamma_hat=log_gamma,
            trajectory=ancestral_path(run, leaf),
            iteration=0,
            accept_count=0,
            run_seed=(0, 1, attempt),
        )
    raise InitFailed(max_attempts)


def pmmh_step(state: ChainState, hmm: AbcHmm, priors: PriorSpec,
              proposals: ProposalSpec, n_alive: int, trial_cap: int,
              seed: SeedLike) -> tuple:
    """One Metropolis-Hastings move; returns (new_state, StepRecord).

    The proposal's filter estimate is computed once; the current point's
    stored estimate is reused as-is. Proposals outside the prior support are
    rejected without running the filter; cap-exceeded runs are rejections.
    """
    iteration = state.iteration + 1
    rng = _mh_rng(seed, iteration)
    proposed = {
        name: proposals[name].sample(state.theta[name], rng)
        for name in state.theta
    }
    log_prior_proposed = log_prior_density(proposed, priors)
    advance = dict(
        theta=state.theta, log_gamma_hat=state.log_gamma_hat,
        trajectory=state.trajectory, iteration=iteration,
        accept_count=state.accept_count, run_seed=state.run_seed,
    )
    if log_prior_proposed == -math.inf:
        record = StepRecord(
            proposed_theta=proposed, accepted=False, log_gamma_proposed=math.nan,
            trials=0, cap_exceeded=False, prior_rejected=True,
        )
        return ChainState(**advance), record

    filter_key = (iteration, 1)
    try:
        run, log_gamma_proposed = run_alive_filter_once(
            hmm, proposed, n_alive, trial_cap,
            np.random.SeedSequence(entropy=seed, spawn_key=filter_key),
        )
    except CapExceeded as err:
        logger.info("iteration %d: proposal hit the trial cap (%d trials); rejected",
                    iteration, err.trials)
        trials = 0 if err.partial_run is None else err.partial_run.total_trials + err.trials
        record = StepRecord(
            proposed_theta=proposed, accepted=False, log_gamma_proposed=math.nan,
            trials=trials, cap_exceeded=True, prior_rejected=False,
        )
        return ChainState(**advance), record

    log_prior_current = log_prior_density(state.theta, priors)
    log_forward = sum(
        proposals[name].log_density(proposed[name], state.theta[name])
        for name in state.theta
    )
    log_backward = sum(
        proposals[name].log_density(state.theta[name], proposed[name])
        for name in state.theta
    )
    log_ratio = (
        (log_gamma_proposed + log_prior_proposed + log_backward)
        - (state.log_gamma_hat + log_prior_current + log_forward)
    )
    accepted = math.log(rng.random()) < min(0.0, log_ratio)
    record = StepRecord(
        proposed_theta=proposed, accepted=accepted,
        log_gamma_proposed=log_gamma_proposed,
        trials=run.total_trials, cap_exceeded=False, prior_rejected=False,
    )
    if accepted:
        leaf = sample_leaf(run.steps[-1], rng)
        new_state = ChainState(
            theta=proposed,
            log_gamma_hat=log_gamma_proposed,
            trajectory=ancestral_path(run, leaf),
            iteration=iteration,
            accept_count=state.accept_count + 1,
            run_seed=filter_key,
        )
        return new_state, record
    return ChainState(**advance), record


@dataclass
class ChainRecord:
    """Full trace of a chain, one row per iteration after the start."""

    param_names: tuple
    initial_state: ChainState
    thetas: np.ndarray          # (iterations, d)
    log_gamma: np.ndarray       # (iterations,) stored estimate after the move
    accepted: np.ndarray        # (iterations,) bool
    trials: np.ndarray          # (iterations,) proposal-run kernel draws
    cap_exceeded: np.ndarray    # (iterations,) bool
    prior_rejected: np.ndarray  # (iterations,) bool
    seed: object
    n_alive: int
    trial_cap: int
    wall_time: float

    @property
    def iterations(self) -> int:
        return self.thetas.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if self.iterations else 0.0

    @property
    def mean_trials_per_iteration(self) -> float:
        return float(self.trials.mean()) if self.iterations else 0.0


def run_chain(hmm: AbcHmm, priors: PriorSpec, proposals: ProposalSpec,
              iterations: int, n_alive: int, trial_cap: int,
              seed: SeedLike = 0, max_init_attempts: int = 100) -> ChainRecord:
    """Run a full chain: initialise from the prior, then iterate pmmh_step.

    Per-iteration randomness is keyed off (seed, iteration), so a record is
    reproducible from its seed alone.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if set(priors.keys()) != set(proposals.keys()):
        raise ValueError("priors and proposals must cover the same parameter names")
    started = _time.perf_counter()
    state = pmmh_init(hmm, priors, n_alive, trial_cap, seed=seed,
                      max_attempts=max_init_attempts)
    initial = state
    names = tuple(priors.keys())
    thetas = np.empty((iterations, len(names)))
    log_gamma = np.empty(iterations)
    accepted = np.zeros(iterations, dtype=bool)
    trials = np.zeros(iterations, dtype=np.int64)
    capped = np.zeros(iterations, dtype=bool)
    prior_rejected = np.zeros(iterations, dtype=bool)
    for i in range(iterations):
        state, record = pmmh_step(
            state, hmm, priors, proposals, n_alive, trial_cap, seed,
        )
        thetas[i] = [state.theta[name] for name in names]
        log_gamma[i] = state.log_gamma_hat
        accepted[i] = record.accepted
        trials[i] = record.trials
        capped[i] = record.cap_exceeded
        prior_rejected[i] = record.prior_rejected
    return ChainRecord(
        param_names=names,
        initial_state=initial,
        thetas=thetas,
        log_gamma=log_gamma,
        accepted=accepted,
        trials=trials,
        cap_exceeded=capped,
        prior_rejected=prior_rejected,
        seed=seed,
        n_alive=n_alive,
        trial_cap=trial_cap,
        wall_time=_time.perf_counter() - started,
    )


def write_trace_csv(record: ChainRecord, path, meta: Optional[Mapping] = None,
                    burn_in: int = 0, thin: int = 1) -> None:
    """Write the chain trace as CSV: metadata comment line, header, rows.

    Burn-in and thinning are applied on the way out only; the record itself
    always holds the full trace.
    """
    if thin < 1 or burn_in < 0:
        raise ValueError("thin must be >= 1 and burn_in >= 0")
    keep = range(burn_in, record.iterations, thin)
    pairs = {"rows": len(keep), "seed": record.seed, "n_alive": record.n_alive}
    if meta:
        pairs.update(meta)
    header = ["iteration", *record.param_names, "log_gamma_hat", "accepted", "trials"]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write("# " + " ".join(f"{k}={v}" for k, v in pairs.items()) + "\n")
        writer = csv.writer(handle)
        writer.writerow(header)
        for i in keep:
            writer.writerow([
                i + 1,
                *(repr(float(v)) for v in record.thetas[i]),
                repr(float(record.log_gamma[i])),
                int(record.accepted[i]),
                int(record.trials[i]),
            ])


def write_chain_manifest(record: ChainRecord, path, config_echo: Mapping) -> None:
    manifest = {
        "config": dict(config_echo),
        "seed": record.seed if isinstance(record.seed, int) else repr(record.seed),
        "iterations": int(record.iterations),
        "acceptance_rate": record.acceptance_rate,
        "mean_trials_per_iteration": record.mean_trials_per_iteration,
        "cap_exceeded_count": int(record.cap_exceeded.sum()),
        "prior_rejected_count": int(record.prior_rejected.sum()),
        "wall_time_s": record.wall_time,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
