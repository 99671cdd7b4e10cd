"""Tests for the fixed-size bootstrap baseline and its collapse semantics."""

import math

import numpy as np
import pytest

from alivepf import (
    AllZeroWeights,
    FeynmanKacModel,
    baseline_filter_estimate,
    multinomial_resample,
    run_standard_filter,
)


def _uniform_kernel(p, states, rng):
    return rng.uniform(size=states.shape)


def _iid_model(p0, horizon):
    return FeynmanKacModel(
        initial_point=np.array([0.5]),
        horizon=horizon,
        kernel_sampler=_uniform_kernel,
        potential=lambda p, states: states[:, 0] < p0,
    )


def test_always_alive_never_collapses_and_nc_is_zero():
    model = FeynmanKacModel(
        initial_point=np.array([0.0]),
        horizon=10,
        kernel_sampler=_uniform_kernel,
        potential=lambda p, states: np.ones(states.shape[0], dtype=bool),
    )
    run = run_standard_filter(model, n_particles=20, seed=0)
    assert not run.collapsed
    assert run.log_gamma_through(10) == 0.0
    np.testing.assert_array_equal(run.alive_counts, 20)


def test_never_alive_collapses_at_step_one():
    model = FeynmanKacModel(
        initial_point=np.array([0.0]),
        horizon=5,
        kernel_sampler=_uniform_kernel,
        potential=lambda p, states: np.zeros(states.shape[0], dtype=bool),
    )
    run = run_standard_filter(model, n_particles=10, seed=0)
    assert run.collapsed
    assert run.collapse.step == 1
    assert len(run.steps) == 1
    assert run.log_nc_increments.size == 0
    with pytest.raises(ValueError):
        run.log_gamma_through(1)


def test_collapse_probability_matches_binomial_chain():
    # With N particles and i.i.d. survival probability p0, each step kills the
    # whole population with probability (1 - p0)^N independently of the past
    # (resampling restores N particles whenever at least one survives).  The
    # probability of surviving all `horizon` steps is (1 - (1 - p0)^N)^horizon.
    p0, n_particles, horizon, reps = 0.5, 2, 20, 10_000
    model = _iid_model(p0, horizon)
    collapsed = 0
    for seed in range(reps):
        run = run_standard_filter(model, n_particles, seed=seed, store_states=False)
        collapsed += run.collapsed
    survive_step = 1.0 - (1.0 - p0) ** n_particles
    target = 1.0 - survive_step**horizon
    se = math.sqrt(target * (1.0 - target) / reps)
    assert abs(collapsed / reps - target) < 3.0 * se


def test_nc_increment_is_alive_fraction():
    model = _iid_model(0.5, 6)
    run = run_standard_filter(model, n_particles=50, seed=3)
    assert not run.collapsed
    expected = np.log(run.alive_counts / 50.0)
    np.testing.assert_allclose(run.log_nc_increments, expected, rtol=1e-15)
    assert math.isclose(
        run.log_gamma_through(4), expected[:4].sum(), rel_tol=1e-15
    )


def test_run_is_deterministic():
    model = _iid_model(0.4, 8)
    a = run_standard_filter(model, n_particles=30, seed=12)
    b = run_standard_filter(model, n_particles=30, seed=12)
    np.testing.assert_array_equal(a.alive_counts, b.alive_counts)
    np.testing.assert_array_equal(a.steps[-1].states, b.steps[-1].states)
    np.testing.assert_array_equal(a.log_nc_increments, b.log_nc_increments)


def test_store_states_false_keeps_only_alive_rows():
    model = _iid_model(0.5, 4)
    full = run_standard_filter(model, n_particles=40, seed=7, store_states=True)
    lean = run_standard_filter(model, n_particles=40, seed=7, store_states=False)
    np.testing.assert_array_equal(full.alive_counts, lean.alive_counts)
    phi = lambda s: s[:, 0]
    for full_step, lean_step in zip(full.steps, lean.steps):
        assert lean_step.states.shape[0] == full_step.alive_count
        assert math.isclose(
            baseline_filter_estimate(full_step, phi),
            baseline_filter_estimate(lean_step, phi),
            rel_tol=1e-15,
        )


def test_multinomial_resample_degenerate_weights():
    rng = np.random.default_rng(0)
    only_first = multinomial_resample(np.array([1.0, 0.0, 0.0]), 1000, rng)
    assert set(np.unique(only_first).tolist()) == {0}
    with pytest.raises(AllZeroWeights):
        multinomial_resample(np.array([0.0, 0.0]), 5, rng)
    with pytest.raises(ValueError):
        multinomial_resample(np.array([]), 5, rng)
    with pytest.raises(ValueError):
        multinomial_resample(np.array([0.5, -0.5]), 5, rng)


def test_multinomial_resample_proportions():
    rng = np.random.default_rng(101)
    draws = multinomial_resample(np.array([1.0, 1.0]), 100_000, rng)
    frac = (draws == 0).mean()
    se = math.sqrt(0.25 / 100_000)
    assert abs(frac - 0.5) < 3.0 * se


def test_filter_estimate_requires_alive_particles():
    model = _iid_model(0.5, 1)
    run = run_standard_filter(model, n_particles=30, seed=5)
    step = run.steps[0]
    assert baseline_filter_estimate(step, lambda s: np.full(s.shape[0], 2.0)) == 2.0
    # Alive particles sit below 0.5 in this model.
    mean = baseline_filter_estimate(step, lambda s: s[:, 0])
    assert 0.0 < mean < 0.5
    dead = FeynmanKacModel(
        initial_point=np.array([0.0]),
        horizon=1,
        kernel_sampler=_uniform_kernel,
        potential=lambda p, states: np.zeros(states.shape[0], dtype=bool),
    )
    dead_run = run_standard_filter(dead, n_particles=10, seed=1)
    with pytest.raises(AllZeroWeights):
        baseline_filter_estimate(dead_run.steps[0], lambda s: s[:, 0])


def test_rejects_empty_population():
    with pytest.raises(ValueError):
        run_standard_filter(_iid_model(0.5, 1), n_particles=0)
