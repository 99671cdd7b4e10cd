"""The alive particle filter and its estimators.

Each step keeps drawing particles until a prescribed number of them are
alive (potential one). The stopping time T_p is the index of the draw that
achieves the n_alive-th success, so the final draw of a step is alive by
construction. Per-step draw counts turn into an unbiased estimator of the
normalizing constant: the product over completed steps (final step excluded)
of (n_alive - 1) / (T_p - 1).

Two resampling variants are provided. The default draws ancestors uniformly
from the alive particles among the first T_{p-1} - 1 draws of the previous
step (the final particle is excluded, which is what makes the product
estimator unbiased). The "lgo" variant draws uniformly from all alive
particles of the previous step, final one included.

All indices are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import CapExceeded, LeanStepError
from .fk_core import FeynmanKacModel, Particle, Trajectory

DEFAULT_TRIAL_CAP = 10_000_000
# Upper bound on a single proposal block, to bound transient memory. The
# stopping rule only needs draws to be generated and counted in index order,
# so batching does not change the law of a step.
_BLOCK_LIMIT = 1 << 22

SeedLike = Union[int, np.random.SeedSequence]


@dataclass
class AliveStep:
    """One completed step of the alive filter.

    ``states`` holds one row per draw (shape (T_p, d)) unless the step was
    run in lean mode, in which case only the rows listed in ``kept_indices``
    (the alive draws) were retained and ``states`` has one row per kept
    index. ``ancestors`` holds, for every draw, the 0-based index of its
    ancestor in the previous step (None at the first step).
    """

    time: int
    stopping_time: int
    states: np.ndarray
    alive_mask: np.ndarray
    ancestors: Optional[np.ndarray]
    kept_indices: Optional[np.ndarray] = None

    @property
    def is_lean(self) -> bool:
        return self.kept_indices is not None

    @property
    def n_alive(self) -> int:
        return int(self.alive_mask.sum())

    def alive_pool(self) -> np.ndarray:
        """Indices of alive draws among the first T_p - 1 (n_alive - 1 of them)."""
        return np.flatnonzero(self.alive_mask[: self.stopping_time - 1])

    def lgo_pool(self) -> np.ndarray:
        """Indices of all alive draws, final one included (n_alive of them)."""
        return np.flatnonzero(self.alive_mask)

    def _rows_for(self, indices: np.ndarray) -> np.ndarray:
        if self.kept_indices is None:
            return self.states[indices]
        positions = np.searchsorted(self.kept_indices, indices)
        if np.any(positions >= self.kept_indices.size) or np.any(
            self.kept_indices[np.minimum(positions, self.kept_indices.size - 1)] != indices
        ):
            raise LeanStepError(
                f"step {self.time} was stored lean; a dead draw's state was requested"
            )
        return self.states[positions]

    def state_at(self, index: int) -> np.ndarray:
        if not 0 <= index < self.stopping_time:
            raise IndexError(
                f"draw index {index} out of range for a step with {self.stopping_time} draws"
            )
        return self._rows_for(np.asarray([index]))[0]

    @property
    def final_state(self) -> np.ndarray:
        return self.state_at(self.stopping_time - 1)

    def particle(self, index: int) -> Particle:
        return Particle(state=self.state_at(index), alive=bool(self.alive_mask[index]))

    def all_states(self) -> np.ndarray:
        """The full (T_p, d) draw array; unavailable for lean steps."""
        if self.kept_indices is not None:
            raise LeanStepError(
                f"step {self.time} was stored lean; dead draws were dropped"
            )
        return self.states


@dataclass
class FilterRun:
    """A completed alive-filter pass over all steps of a model."""

    steps: list
    n_alive: int
    log_gamma: float
    seed_manifest: str
    variant: str

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @property
    def stopping_times(self) -> np.ndarray:
        return np.array([s.stopping_time for s in self.steps], dtype=np.int64)

    @property
    def total_trials(self) -> int:
        return int(self.stopping_times.sum())

    @property
    def log_gamma_all_steps(self) -> float:
        """Log marginal-likelihood estimate with every step's factor included.

        ``log_gamma`` stops before the final step (that is the unbiased
        estimator of the time-n normalizing constant); this property extends
        the product by the final step's (n_alive - 1)/(T_n - 1) factor, which
        is the unbiased estimate for the full observation record.
        """
        last = self.steps[-1]
        return self.log_gamma + _log_factor(self.n_alive, last.stopping_time)

    def recompute_log_gamma(self) -> float:
        """Rebuild log_gamma from stored stopping times, same order and terms."""
        total = 0.0
        for step in self.steps[:-1]:
            total += _log_factor(self.n_alive, step.stopping_time)
        return total


def _log_factor(n_alive: int, stopping_time: int) -> float:
    return math.log((n_alive - 1) / (stopping_time - 1))


def _as_rng(randomness: Union[SeedLike, np.random.Generator]) -> np.random.Generator:
    if isinstance(randomness, np.random.Generator):
        return randomness
    return np.random.default_rng(randomness)


def _collect_step(
    model: FeynmanKacModel,
    time: int,
    n_alive: int,
    trial_cap: int,
    rng: np.random.Generator,
    prev: Optional[AliveStep],
    pool: Optional[np.ndarray],
    block_hint: int,
    lean: bool,
) -> AliveStep:
    """Draw particles in index order until the n_alive-th success.

    Draws are generated in blocks for throughput; successes are counted in
    strict index order and the block is truncated at the stopping index, so
    the law of (draws, T_p) is exactly that of one-at-a-time sampling.
    """
    if n_alive < 2:
        raise ValueError("n_alive must be >= 2")
    if trial_cap < n_alive:
        raise CapExceeded(step=time, trials=0)

    state_parts = []
    alive_parts = []
    ancestor_parts = []
    trials = 0
    successes = 0
    block = max(int(block_hint), 16)
    while True:
        block = min(block, trial_cap - trials, _BLOCK_LIMIT)
        if prev is None:
            ancestors = None
            sources = model.initial_population(block)
        else:
            ancestors = pool[rng.integers(0, pool.size, size=block)]
            sources = prev._rows_for(ancestors)
        proposed = np.asarray(model.kernel_sampler(time, sources, rng), dtype=float)
        alive = model.evaluate_potential(time, proposed)
        cumulative = np.cumsum(alive)
        found = int(cumulative[-1]) if block else 0
        need = n_alive - successes
        if found >= need:
            # cumulative hits `need` exactly at an alive draw: that draw is T_p.
            stop = int(np.searchsorted(cumulative, need)) + 1
            state_parts.append(proposed[:stop])
            alive_parts.append(alive[:stop])
            if ancestors is not None:
                ancestor_parts.append(ancestors[:stop])
            trials += stop
            break
        state_parts.append(proposed)
        alive_parts.append(alive)
        if ancestors is not None:
            ancestor_parts.append(ancestors)
        trials += block
        successes += found
        if trials >= trial_cap:
            raise CapExceeded(step=time, trials=trials)
        # Grow the next block from the observed success rate.
        rate = (successes + 1.0) / (trials + 2.0)
        block = int((n_alive - successes) / rate * 1.25) + 16

    states = state_parts[0] if len(state_parts) == 1 else np.concatenate(state_parts)
    alive_mask = alive_parts[0] if len(alive_parts) == 1 else np.concatenate(alive_parts)
    if prev is None:
        ancestors_all = None
    else:
        ancestors_all = (
            ancestor_parts[0] if len(ancestor_parts) == 1 else np.concatenate(ancestor_parts)
        )
    kept = None
    if lean:
        kept = np.flatnonzero(alive_mask)
        states = states[kept]
    return AliveStep(
        time=time,
        stopping_time=trials,
        states=states,
        alive_mask=alive_mask,
        ancestors=ancestors_all,
        kept_indices=kept,
    )


def alive_init(
    model: FeynmanKacModel,
    n_alive: int,
    trial_cap: int = DEFAULT_TRIAL_CAP,
    randomness: Union[SeedLike, np.random.Generator] = 0,
    lean: bool = False,
) -> AliveStep:
    """Run step 1: draw from the initial kernel until n_alive successes."""
    rng = _as_rng(randomness)
    return _collect_step(
        model, 1, n_alive, trial_cap, rng,
        prev=None, pool=None, block_hint=2 * n_alive, lean=lean,
    )


def _resample_step(
    prev: AliveStep,
    model: FeynmanKacModel,
    time: int,
    n_alive: int,
    trial_cap: int,
    rng: np.random.Generator,
    pool: np.ndarray,
    lean: bool,
) -> AliveStep:
    if time != prev.time + 1:
        raise ValueError(f"expected step {prev.time + 1}, got {time}")
    hint = int(1.2 * prev.stopping_time) + 16
    return _collect_step(
        model, time, n_alive, trial_cap, rng,
        prev=prev, pool=pool, block_hint=hint, lean=lean,
    )


def alive_step(
    prev: AliveStep,
    model: FeynmanKacModel,
    time: int,
    n_alive: int,
    trial_cap: int = DEFAULT_TRIAL_CAP,
    randomness: Union[SeedLike, np.random.Generator] = 0,
    lean: bool = False,
) -> AliveStep:
    """Advance one step, resampling ancestors from the previous step's
    alive particles with its final particle excluded."""
    rng = _as_rng(randomness)
    return _resample_step(prev, model, time, n_alive, trial_cap, rng, prev.alive_pool(), lean)


def lgo_step(
    prev: AliveStep,
    model: FeynmanKacModel,
    time: int,
    n_alive: int,
    trial_cap: int = DEFAULT_TRIAL_CAP,
    randomness: Union[SeedLike, np.random.Generator] = 0,
    lean: bool = False,
) -> AliveStep:
    """Advance one step, resampling ancestors from all alive particles of the
    previous step, its final particle included."""
    rng = _as_rng(randomness)
    return _resample_step(prev, model, time, n_alive, trial_cap, rng, prev.lgo_pool(), lean)


def run_filter(
    model: FeynmanKacModel,
    n_alive: int,
    trial_cap: int = DEFAULT_TRIAL_CAP,
    seed: SeedLike = 0,
    variant: str = "alive",
    lean: bool = False,
) -> FilterRun:
    """Run the filter over the model's whole horizon.

    Deterministic for a fixed seed. If a step exhausts ``trial_cap`` the
    CapExceeded error is re-raised with the completed steps attached as
    ``partial_run``.
    """
    if variant not in ("alive", "lgo"):
        raise ValueError(f"unknown variant {variant!r}")
    step_fn = alive_step if variant == "alive" else lgo_step
    rng = _as_rng(seed)
    manifest = f"seed={seed!r} bit_generator=PCG64"
    steps = []
    log_gamma = 0.0
    try:
        step = alive_init(model, n_alive, trial_cap, rng, lean=lean)
        steps.append(step)
        for p in range(2, model.horizon + 1):
            log_gamma += _log_factor(n_alive, step.stopping_time)
            step = step_fn(step, model, p, n_alive, trial_cap, rng, lean=lean)
            steps.append(step)
    except CapExceeded as err:
        err.partial_run = FilterRun(
            steps=steps,
            n_alive=n_alive,
            log_gamma=log_gamma,
            seed_manifest=manifest,
            variant=variant,
        )
        raise
    return FilterRun(
        steps=steps,
        n_alive=n_alive,
        log_gamma=log_gamma,
        seed_manifest=manifest,
        variant=variant,
    )


def predictor_estimate(step: AliveStep, phi: Callable[[np.ndarray], np.ndarray]) -> float:
    """Average of phi over the first T_p - 1 draws (the final draw is excluded).

    This is the unbiased-in-expectation predictor estimate; it needs dead
    draws too, so it is unavailable for steps stored lean.
    """
    states = step.all_states()
    values = np.asarray(phi(states[: step.stopping_time - 1]), dtype=float)
    return float(values.mean())


def filter_estimate(step: AliveStep, phi: Callable[[np.ndarray], np.ndarray]) -> float:
    """Average of phi over the alive draws among the first T_p - 1.

    Equal-weight average over n_alive - 1 particles; this is the ratio of the
    predictor estimates of (potential * phi) and (potential).
    """
    rows = step._rows_for(step.alive_pool())
    values = np.asarray(phi(rows), dtype=float)
    return float(values.mean())


def gamma_estimate(run: FilterRun, phi: Callable[[np.ndarray], np.ndarray]):
    """Unnormalised-measure estimate as (log_scale, signed_mantissa).

    The value is exp(log_scale) * signed_mantissa: the positive product of
    per-step factors is kept in the log domain, the final-step predictor
    average of phi (which may be negative) stays linear.
    """
    return run.log_gamma, predictor_estimate(run.steps[-1], phi)


def ancestral_path(run: FilterRun, leaf: int) -> Trajectory:
    """Trace the ancestry of the draw ``leaf`` of the final step back to step 1.

    ``leaf`` is a 0-based index that must lie among the final step's first
    T_n - 1 draws. All path entries at earlier steps are alive particles,
    because ancestors are only ever drawn from alive pools.
    """
    last = run.steps[-1]
    if not 0 <= leaf < last.stopping_time - 1:
        raise IndexError(
            f"leaf {leaf} out of range; final step has {last.stopping_time} draws "
            f"and the last one cannot be a leaf"
        )
    rows = []
    index = leaf
    for step in reversed(run.steps):
        rows.append(step.state_at(index))
        if step.ancestors is not None:
            index = int(step.ancestors[index])
    rows.reverse()
    return Trajectory(states=np.vstack(rows))


def sample_leaf(step: AliveStep, randomness: Union[SeedLike, np.random.Generator]) -> int:
    """Draw a leaf uniformly from the alive draws among the first T_p - 1.

    With indicator potentials, selecting a terminal particle proportionally
    to its potential value reduces to this uniform draw.
    """
    rng = _as_rng(randomness)
    pool = step.alive_pool()
    return int(pool[rng.integers(0, pool.size)])
