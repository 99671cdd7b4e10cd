"""Independent reference computations used to validate the Monte Carlo code.

Nothing here touches the particle filters: the Kalman recursion, the
tensor-grid posterior, the exact negative-binomial summations and the
asymptotic-variance formula are all closed-form or quadrature routes, so
they can sit on the other side of a statistical comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .errors import GridTooCoarse, InvalidMoments
from .models import LinearGaussianParams, lg_abc_obs_density


@dataclass(frozen=True)
class KalmanOutput:
    predicted_mean: np.ndarray
    predicted_var: np.ndarray
    filtered_mean: np.ndarray
    filtered_var: np.ndarray
    loglik_increments: np.ndarray

    @property
    def log_likelihood(self) -> float:
        return float(self.loglik_increments.sum())

    def log_likelihood_through(self, step_count: int) -> float:
        return float(self.loglik_increments[:step_count].sum())


def kalman_filter(params: LinearGaussianParams, observations) -> KalmanOutput:
    """Exact filter for Z_n = Z_{n-1} + V_n, Y_n = obs_coef * Z_n + W_n.

    The initial latent value is the fixed point z0 (zero initial variance).
    Zero noise variances are legal as long as each step's observation
    predictive variance stays positive.
    """
    y = np.asarray(observations, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("observations must be nonempty")
    coef = params.obs_coef
    n = y.size
    pred_mean = np.empty(n)
    pred_var = np.empty(n)
    filt_mean = np.empty(n)
    filt_var = np.empty(n)
    increments = np.empty(n)
    mean, var = params.z0, 0.0
    for t in range(n):
        mean_p = mean
        var_p = var + params.sigma_v2
        obs_var = coef * coef * var_p + params.sigma_w2
        if obs_var <= 0:
            raise ValueError(f"degenerate observation predictive variance at step {t + 1}")
        innovation = y[t] - coef * mean_p
        increments[t] = -0.5 * (math.log(2.0 * math.pi * obs_var) + innovation**2 / obs_var)
        gain = coef * var_p / obs_var
        mean = mean_p + gain * innovation
        var = var_p * (1.0 - coef * gain)
        pred_mean[t], pred_var[t] = mean_p, var_p
        filt_mean[t], filt_var[t] = mean, var
    return KalmanOutput(
        predicted_mean=pred_mean,
        predicted_var=pred_var,
        filtered_mean=filt_mean,
        filtered_var=filt_var,
        loglik_increments=increments,
    )


def _grid_log_marginals(
    make_params: Callable[[float], LinearGaussianParams],
    param_grid: np.ndarray,
    observations: np.ndarray,
    epsilon: float,
    resolution: int,
) -> np.ndarray:
    """Midpoint tensor-grid value of the smoothed marginal likelihood per theta."""
    logs = np.empty(param_grid.size)
    for i, value in enumerate(param_grid):
        params = make_params(float(value))
        params.require_positive()
        sv, sw = math.sqrt(params.sigma_v2), math.sqrt(params.sigma_w2)
        horizon = observations.size
        # Latent range: start plus observation pullbacks, padded by 8
        # spread units so the path mass is captured at every theta.
        unit = sv * math.sqrt(horizon) + (sw + epsilon) / abs(params.obs_coef)
        anchors = np.concatenate(([params.z0], observations / params.obs_coef))
        lo, hi = anchors.min() - 8.0 * unit, anchors.max() + 8.0 * unit
        edges = np.linspace(lo, hi, resolution + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        width = edges[1] - edges[0]
        transition = (
            np.exp(-0.5 * ((centers[None, :] - centers[:, None]) / sv) ** 2)
            / (sv * math.sqrt(2.0 * math.pi))
        )
        weights = (
            np.exp(-0.5 * ((centers - params.z0) / sv) ** 2)
            / (sv * math.sqrt(2.0 * math.pi))
            * width
        )
        log_shift = 0.0
        for t in range(horizon):
            if t > 0:
                weights = (weights @ transition) * width
            weights = weights * lg_abc_obs_density(params, observations[t], centers, epsilon)
            total = weights.sum()
            if total <= 0:
                log_shift = -math.inf
                break
            weights = weights / total
            log_shift += math.log(total)
        logs[i] = log_shift
    return logs


def grid_abc_posterior(
    param_grid,
    make_params: Callable[[float], LinearGaussianParams],
    observations,
    epsilon: float,
    latent_grid: int = 400,
    prior_weights=None,
    refine_tol: float = 1e-4,
) -> np.ndarray:
    """Posterior weights over a finite parameter grid by latent quadrature.

    Integrates the smoothed likelihood over the latent path with a midpoint
    rule on a shared latent grid, multiplies by the prior and normalizes.
    The computation is repeated at double resolution; if the two normalized
    weight vectors differ by >= refine_tol in total variation the grid is
    declared too coarse. The finer result is returned. Intended for short
    records (horizon <= 4).
    """
    grid = np.asarray(param_grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("param_grid must be nonempty")
    y = np.asarray(observations, dtype=float).ravel()
    if y.size > 4:
        raise ValueError("grid quadrature is restricted to horizon <= 4")
    if latent_grid < 2:
        raise ValueError("latent_grid must be >= 2")
    if prior_weights is None:
        prior = np.full(grid.size, 1.0 / grid.size)
    else:
        prior = np.asarray(prior_weights, dtype=float).ravel()
        if prior.shape != grid.shape or np.any(prior < 0) or prior.sum() <= 0:
            raise ValueError("prior_weights must be nonnegative and match param_grid")
        prior = prior / prior.sum()

    def weights_at(resolution: int) -> np.ndarray:
        logs = _grid_log_marginals(make_params, grid, y, epsilon, resolution)
        scaled = logs + np.log(prior, where=prior > 0, out=np.full_like(prior, -np.inf))
        scaled -= scaled.max()
        w = np.exp(scaled)
        return w / w.sum()

    coarse = weights_at(latent_grid)
    fine = weights_at(2 * latent_grid)
    tv = 0.5 * np.abs(coarse - fine).sum()
    if tv >= refine_tol:
        raise GridTooCoarse(
            f"doubling the latent grid moved the weights by {tv:.3g} "
            f"(tolerance {refine_tol:g}); increase latent_grid"
        )
    return fine


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_error: float
    target: float
    replicates: int

    @property
    def error_in_se(self) -> float:
        if self.std_error == 0:
            return 0.0 if self.mean == self.target else math.inf
        return abs(self.mean - self.target) / self.std_error


def _draw_stopping_times(p: float, n_success: int, replicates: int, seed) -> np.ndarray:
    """Trials needed for the n_success-th success at per-trial probability p."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    failures = rng.negative_binomial(n_success, p, size=replicates)
    return n_success + failures


def nb_identity_mc(p: float, n_success: int, replicates: int, seed=0) -> MonteCarloEstimate:
    """Monte Carlo check that E[(N-1)/(T-1)] = p for T the trials-to-Nth-success count."""
    if n_success < 2:
        raise ValueError("n_success must be >= 2")
    t = _draw_stopping_times(p, n_success, replicates, seed)
    values = (n_success - 1.0) / (t - 1.0)
    return MonteCarloEstimate(
        mean=float(values.mean()),
        std_error=float(values.std(ddof=1) / math.sqrt(replicates)),
        target=p,
        replicates=replicates,
    )


def nb_pair_identity_mc(p: float, n_success: int, replicates: int, seed=0) -> MonteCarloEstimate:
    """Monte Carlo check that E[(N-1)(N-2)/((T-1)(T-2))] = p^2."""
    if n_success < 3:
        raise ValueError("n_success must be >= 3")
    t = _draw_stopping_times(p, n_success, replicates, seed)
    values = (n_success - 1.0) * (n_success - 2.0) / ((t - 1.0) * (t - 2.0))
    return MonteCarloEstimate(
        mean=float(values.mean()),
        std_error=float(values.std(ddof=1) / math.sqrt(replicates)),
        target=p * p,
        replicates=replicates,
    )


def nb_expectation_exact(p: float, n_success: int,
                         statistic: Callable[[np.ndarray], np.ndarray],
                         tail_mass: float = 1e-12) -> float:
    """Exact E[statistic(T)] by direct pmf summation, truncated once the
    remaining tail mass is below ``tail_mass``.

    Deterministic second witness for the Monte Carlo identity checks; the
    statistic must be bounded on the support so the truncation error is at
    most sup|statistic| * tail_mass.
    """
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if p == 1.0:
        return float(statistic(np.asarray([n_success], dtype=float))[0])
    k_max = int(stats.nbinom.isf(tail_mass, n_success, p)) + 1
    k = np.arange(0, k_max + 1)
    pmf = stats.nbinom.pmf(k, n_success, p)
    t = (n_success + k).astype(float)
    return float(np.sum(np.asarray(statistic(t), dtype=float) * pmf))


def nb_identity_exact(p: float, n_success: int, tail_mass: float = 1e-12) -> float:
    return nb_expectation_exact(
        p, n_success, lambda t: (n_success - 1.0) / (t - 1.0), tail_mass
    )


def nb_pair_identity_exact(p: float, n_success: int, tail_mass: float = 1e-12) -> float:
    return nb_expectation_exact(
        p, n_success,
        lambda t: (n_success - 1.0) * (n_success - 2.0) / ((t - 1.0) * (t - 2.0)),
        tail_mass,
    )


@dataclass(frozen=True)
class PhiMoments:
    """Moments of a test function under the shared proposal law nu.

    ``nu_g_phi`` and ``nu_g_phi2`` are the moments against the indicator
    potential; the asymptotic-variance value does not involve them, but they
    are validated for consistency with the unconditioned moments.
    """

    nu_phi: float
    nu_phi2: float
    nu_g_phi: float = 0.0
    nu_g_phi2: float = 0.0


def clt_variance_ideal(p0: float, n: int, moments: PhiMoments) -> float:
    """Asymptotic predictor variance in the i.i.d. scenario.

    Convention: the predictor error is scaled by the square root of the
    number of proposals consumed at the final step (one less than the
    stopping time), not by the square root of the kept-alive count; the two
    scalings differ asymptotically by the trials-per-survivor ratio 1/p0.
    With every kernel equal to the same proposal nu and every potential the
    same indicator of nu-mass p0, the propagated terms of the variance sum
    vanish: the centred test function integrates to zero under nu, and each
    back-propagation multiplies by exactly that integral. What remains is
    the current-step term nu(phi^2) - nu(phi)^2, for every n. Validated
    against direct simulation of the stopped proposal process in the module
    tests.
    """
    if not 0 < p0 < 1:
        raise InvalidMoments("p0 must lie strictly between 0 and 1")
    if n < 1:
        raise InvalidMoments("n must be >= 1")
    variance = moments.nu_phi2 - moments.nu_phi**2
    if variance < -1e-12:
        raise InvalidMoments("nu(phi^2) < nu(phi)^2: impossible moment pair")
    if moments.nu_g_phi2 < -1e-12 or moments.nu_g_phi2 > moments.nu_phi2 + 1e-12:
        raise InvalidMoments("nu(G phi^2) must lie in [0, nu(phi^2)] for an indicator G")
    if moments.nu_g_phi**2 > p0 * moments.nu_g_phi2 + 1e-12:
        raise InvalidMoments("nu(G phi)^2 > p0 * nu(G phi^2) violates Cauchy-Schwarz")
    return max(variance, 0.0)
