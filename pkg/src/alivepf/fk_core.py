"""Feynman-Kac models with indicator potentials, and shared particle value types.

A model is a time-inhomogeneous Markov chain started at a fixed point and
reweighted at each step by a 0/1 potential. Populations of states are plain
float arrays of shape (k, d): axis 0 indexes particles, axis 1 the state
components. Everything downstream treats states as opaque rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# (time p, states (k, d), rng) -> propagated states (k, d)
KernelSampler = Callable[[int, np.ndarray, np.random.Generator], np.ndarray]
# (time p, states (k, d)) -> 0/1 values (k,)
PotentialFn = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FeynmanKacModel:
    """Markov kernel family plus indicator potentials over times 1..horizon.

    Parameters
    ----------
    initial_point : array_like, shape (d,)
        Fixed starting state. It is not a particle itself: time 1 states are
        drawn by passing copies of it through ``kernel_sampler``.
    horizon : int
        Number of potential-weighted steps, >= 1.
    kernel_sampler : callable
        ``kernel_sampler(p, states, rng)`` draws one transition per row of
        ``states`` through the time-p kernel. Must be a pure function of its
        arguments and the rng stream.
    potential : callable
        ``potential(p, states)`` evaluates the time-p indicator on each row.
        Values must be 0/1 (or bool).
    """

    initial_point: np.ndarray
    horizon: int
    kernel_sampler: KernelSampler
    potential: PotentialFn

    def __post_init__(self):
        point = np.atleast_1d(np.asarray(self.initial_point, dtype=float))
        if point.ndim != 1:
            raise ValueError("initial_point must be a scalar or 1-d array")
        object.__setattr__(self, "initial_point", point)
        if int(self.horizon) < 1:
            raise ValueError("horizon must be >= 1")
        object.__setattr__(self, "horizon", int(self.horizon))

    @property
    def state_dim(self) -> int:
        return self.initial_point.shape[0]

    def initial_population(self, count: int) -> np.ndarray:
        """(count, d) array of copies of the starting point."""
        return np.tile(self.initial_point, (count, 1))

    def evaluate_potential(self, p: int, states: np.ndarray) -> np.ndarray:
        """Evaluate the time-p potential, validated to be 0/1, as a bool array."""
        raw = np.asarray(self.potential(p, states))
        if raw.shape != (states.shape[0],):
            raise ValueError(
                f"potential at step {p} returned shape {raw.shape}, "
                f"expected ({states.shape[0]},)"
            )
        if raw.dtype != np.bool_:
            if not np.all((raw == 0) | (raw == 1)):
                raise ValueError(f"potential at step {p} returned values outside {{0, 1}}")
            raw = raw.astype(bool)
        return raw


@dataclass(frozen=True)
class Particle:
    """One state together with its potential value at its step."""

    state: np.ndarray
    alive: bool


@dataclass(frozen=True)
class Trajectory:
    """A state path across steps 1..n, one row per step."""

    states: np.ndarray  # (n, d)

    def __post_init__(self):
        object.__setattr__(self, "states", np.atleast_2d(np.asarray(self.states, dtype=float)))

    def __len__(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class TestFunction:
    """Bounded measurable test function evaluated row-wise on populations.

    ``bound``, when given, is asserted against the evaluated values in debug
    runs (python -O disables the check).
    """

    __test__ = False  # the Test* name is part of the API, not a test case

    evaluate: Callable[[np.ndarray], np.ndarray]
    bound: Optional[float] = None

    def __call__(self, states: np.ndarray) -> np.ndarray:
        values = np.asarray(self.evaluate(states), dtype=float)
        if __debug__ and self.bound is not None:
            assert np.all(np.abs(values) <= self.bound + 1e-12), (
                "test function exceeded its declared bound"
            )
        return values


def constant_one(states: np.ndarray) -> np.ndarray:
    return np.ones(states.shape[0])


@dataclass(frozen=True)
class ModelDiagnostics:
    """Unconditional forward-simulation summary from validate_model."""

    alive_fractions: np.ndarray  # (horizon,) mean potential per step
    dead_steps: tuple            # steps whose probe population was all dead
    probe_count: int
    seed_manifest: str


def validate_model(model: FeynmanKacModel, probe_count: int = 1000, seed: int = 0) -> ModelDiagnostics:
    """Forward-simulate probe chains and report the alive fraction per step.

    Draws ``probe_count`` independent unconditional chains from the kernels
    (no selection between steps) and evaluates the potential at each step.
    A step whose probe population is entirely dead is flagged: the filters
    cannot get past such a step. Deterministic for a fixed seed; the model is
    never mutated.
    """
    if probe_count < 1:
        raise ValueError("probe_count must be >= 1")
    rng = np.random.default_rng(seed)
    population = model.initial_population(probe_count)
    fractions = np.empty(model.horizon)
    dead = []
    for p in range(1, model.horizon + 1):
        population = np.asarray(model.kernel_sampler(p, population, rng), dtype=float)
        alive = model.evaluate_potential(p, population)
        fractions[p - 1] = alive.mean()
        if not alive.any():
            dead.append(p)
    return ModelDiagnostics(
        alive_fractions=fractions,
        dead_steps=tuple(dead),
        probe_count=probe_count,
        seed_manifest=f"seed={seed!r} bit_generator=PCG64",
    )
