"""Fixed-size bootstrap filter used as the comparison baseline.

With indicator potentials the weights are 0/1, so a step where every
particle is dead leaves nothing to resample: the run collapses. Collapse is
a recorded outcome here, not an error; estimates past the collapse step are
simply unavailable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import AllZeroWeights
from .fk_core import FeynmanKacModel

SeedLike = Union[int, np.random.SeedSequence]


@dataclass
class BaselineStep:
    time: int
    states: np.ndarray      # (n_particles, d)
    alive_mask: np.ndarray  # (n_particles,) bool

    @property
    def alive_count(self) -> int:
        return int(self.alive_mask.sum())


@dataclass(frozen=True)
class CollapseRecord:
    """Step at which every particle died, with the alive-count history up to it."""

    step: int
    alive_counts: np.ndarray


@dataclass
class BaselineRun:
    steps: list
    n_particles: int
    log_nc_increments: np.ndarray  # log(alive/n) per completed step, collapse step excluded
    collapse: Optional[CollapseRecord]
    seed_manifest: str

    @property
    def collapsed(self) -> bool:
        return self.collapse is not None

    @property
    def alive_counts(self) -> np.ndarray:
        return np.array([s.alive_count for s in self.steps], dtype=np.int64)

    def log_gamma_through(self, step_count: int) -> float:
        """Sum of the first ``step_count`` normalizing-constant factors.

        Undefined (raises) from the collapse step on: the estimate there is
        an exact zero, which callers must treat as unavailable rather than a
        float.
        """
        if self.collapse is not None and step_count >= self.collapse.step:
            raise ValueError(
                f"run collapsed at step {self.collapse.step}; no finite estimate exists"
            )
        return float(self.log_nc_increments[:step_count].sum())


def multinomial_resample(weights: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` indices i.i.d. proportionally to ``weights``."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a nonempty 1-d array")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise AllZeroWeights("cannot resample: all weights are zero")
    edges = np.cumsum(w)
    draws = rng.random(count) * edges[-1]
    return np.searchsorted(edges, draws, side="right").astype(np.int64)


def run_standard_filter(
    model: FeynmanKacModel,
    n_particles: int,
    seed: SeedLike = 0,
    store_states: bool = True,
) -> BaselineRun:
    """Propagate a fixed-size population with multinomial resampling each step.

    Resampling happens every step among the alive particles. If a step kills
    the whole population the run stops there with a collapse record; the
    normalizing-constant accumulator keeps only the strictly positive
    factors, and the collapse itself stands for the final zero factor.
    """
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    rng = np.random.default_rng(seed)
    manifest = f"seed={seed!r} bit_generator=PCG64"
    steps = []
    increments = []
    collapse = None
    population = model.initial_population(n_particles)
    for p in range(1, model.horizon + 1):
        population = np.asarray(model.kernel_sampler(p, population, rng), dtype=float)
        alive = model.evaluate_potential(p, population)
        steps.append(
            BaselineStep(
                time=p,
                states=population if store_states else population[alive],
                alive_mask=alive if store_states else np.ones(int(alive.sum()), dtype=bool),
            )
        )
        count = int(alive.sum())
        if count == 0:
            collapse = CollapseRecord(
                step=p,
                alive_counts=np.array([s.alive_count for s in steps], dtype=np.int64),
            )
            break
        increments.append(math.log(count / n_particles))
        if p < model.horizon:
            indices = multinomial_resample(alive.astype(float), n_particles, rng)
            population = population[indices]
    return BaselineRun(
        steps=steps,
        n_particles=n_particles,
        log_nc_increments=np.asarray(increments, dtype=float),
        collapse=collapse,
        seed_manifest=manifest,
    )


def baseline_filter_estimate(step: BaselineStep, phi: Callable[[np.ndarray], np.ndarray]) -> float:
    """Equal-weight average of phi over the step's alive particles."""
    rows = step.states[step.alive_mask]
    if rows.shape[0] == 0:
        raise AllZeroWeights(f"step {step.time} has no alive particles")
    return float(np.asarray(phi(rows), dtype=float).mean())
