"""ABC hidden Markov models and the concrete model families.

An ABC-HMM carries a latent transition sampler and an observation sampler.
Compiling it against a parameter value produces a Feynman-Kac model on the
extended state (z, u), where u is a pseudo-observation drawn alongside each
latent move and the step-p potential is the indicator that u falls within
``epsilon`` of the recorded observation y_p (strict inequality, open ball).

Concrete families:

* linear Gaussian: Z_n = Z_{n-1} + V_n, Y_n = 2 Z_n + W_n with V, W centred
  Gaussians. The smoothed-observation density (the ball mass divided by the
  ball width) is available in closed form for this family.
* stable-noise stochastic volatility: Y_n = eps_n * beta * exp(Z_n) with
  eps_n alpha-stable and Z_n = phi Z_{n-1} + V_n, V_n ~ N(0, c).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.special import ndtr

from .errors import NonPositiveIndex, ParseError
from .fk_core import FeynmanKacModel

Theta = Mapping[str, float]
# (theta, values (k,), rng) -> values (k,)
ConditionalSampler = Callable[[Theta, np.ndarray, np.random.Generator], np.ndarray]


def absolute_difference(u: np.ndarray, y: float) -> np.ndarray:
    return np.abs(u - y)


@dataclass(frozen=True)
class AbcHmm:
    """Hidden Markov model with samplable transitions, set up for ABC filtering.

    ``latent_sampler(theta, z, rng)`` draws Z_p | Z_{p-1} = z row-wise;
    ``obs_sampler(theta, z, rng)`` draws an observation given the latent
    value. ``epsilon`` is the acceptance radius; ``math.inf`` is allowed as
    an accept-everything sentinel for tests. ``fixed`` supplies parameter
    entries that are not part of theta (they are merged underneath it).
    """

    latent_sampler: ConditionalSampler
    obs_sampler: ConditionalSampler
    epsilon: float
    observations: np.ndarray
    initial_latent: float = 0.0
    metric: Callable[[np.ndarray, float], np.ndarray] = absolute_difference
    fixed: Optional[Mapping[str, float]] = None

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float).ravel()
        if obs.size == 0:
            raise ValueError("observations must be nonempty")
        object.__setattr__(self, "observations", obs)
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def horizon(self) -> int:
        return self.observations.size

    def merged(self, theta: Theta) -> dict:
        if self.fixed is None:
            return dict(theta)
        return {**self.fixed, **theta}


def compile_abc_hmm(hmm: AbcHmm, theta: Theta) -> FeynmanKacModel:
    """Bind a parameter value, producing the Feynman-Kac model on (z, u).

    The compiled kernel at step p draws z' from the latent transition and u'
    from the observation law at z'; the potential accepts u' strictly inside
    the epsilon-ball around y_p. Compilation is pure: the same theta and rng
    stream reproduce the same draws.
    """
    params = hmm.merged(theta)
    observations = hmm.observations
    epsilon = hmm.epsilon
    latent = hmm.latent_sampler
    emit = hmm.obs_sampler
    metric = hmm.metric

    def kernel(p: int, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        z = latent(params, states[:, 0], rng)
        u = emit(params, z, rng)
        return np.column_stack((z, u))

    def potential(p: int, states: np.ndarray) -> np.ndarray:
        return metric(states[:, 1], observations[p - 1]) < epsilon

    return FeynmanKacModel(
        initial_point=np.array([hmm.initial_latent, 0.0]),
        horizon=hmm.horizon,
        kernel_sampler=kernel,
        potential=potential,
    )


def latent_values(states: np.ndarray) -> np.ndarray:
    """Test function projecting compiled (z, u) states onto the latent part."""
    return states[:, 0]


@dataclass(frozen=True)
class LinearGaussianParams:
    """Random-walk latent with a scaled noisy observation.

    Zero variances are tolerated at construction so degenerate cases can be
    simulated and pushed through the Kalman recursion in tests; the filters
    and compile_abc_hmm require strictly positive values.
    """

    sigma_v2: float
    sigma_w2: float
    obs_coef: float = 2.0
    z0: float = 0.0

    def __post_init__(self):
        if self.sigma_v2 < 0 or self.sigma_w2 < 0:
            raise ValueError("variances must be nonnegative")

    def require_positive(self):
        if self.sigma_v2 <= 0 or self.sigma_w2 <= 0:
            raise ValueError("this operation needs strictly positive variances")


def lg_abc_hmm(params: LinearGaussianParams, observations, epsilon: float) -> AbcHmm:
    """ABC-HMM for the linear-Gaussian family at fixed parameters."""
    params.require_positive()
    theta = {
        "sigma_v2": params.sigma_v2,
        "sigma_w2": params.sigma_w2,
        "obs_coef": params.obs_coef,
    }
    return AbcHmm(
        latent_sampler=lg_latent_sampler,
        obs_sampler=lg_obs_sampler,
        epsilon=epsilon,
        observations=observations,
        initial_latent=params.z0,
        fixed=theta,
    )


def lg_latent_sampler(theta: Theta, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    sigma_v2 = theta["sigma_v2"]
    if not sigma_v2 > 0:
        raise ValueError("sigma_v2 must be positive")
    return z + math.sqrt(sigma_v2) * rng.standard_normal(z.shape[0])


def lg_obs_sampler(theta: Theta, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    sigma_w2 = theta["sigma_w2"]
    if not sigma_w2 > 0:
        raise ValueError("sigma_w2 must be positive")
    coef = theta.get("obs_coef", 2.0)
    return coef * z + math.sqrt(sigma_w2) * rng.standard_normal(z.shape[0])


def lg_family_hmm(observations, epsilon: float, sigma_w2: float,
                  z0: float = 0.0, obs_coef: float = 2.0) -> AbcHmm:
    """Linear-Gaussian ABC-HMM with sigma_v2 left free in theta (for chains)."""
    return AbcHmm(
        latent_sampler=lg_latent_sampler,
        obs_sampler=lg_obs_sampler,
        epsilon=epsilon,
        observations=observations,
        initial_latent=z0,
        fixed={"sigma_w2": sigma_w2, "obs_coef": obs_coef},
    )


def lg_simulate(params: LinearGaussianParams, horizon: int, seed) -> tuple:
    """Simulate (latent, observations) for the linear-Gaussian model.

    Zero variances are allowed here (degenerate chains are useful fixtures);
    latent noise is drawn for all steps first, observation noise second.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = np.random.default_rng(seed)
    latent_noise = math.sqrt(params.sigma_v2) * rng.standard_normal(horizon)
    obs_noise = math.sqrt(params.sigma_w2) * rng.standard_normal(horizon)
    z = params.z0 + np.cumsum(latent_noise)
    y = params.obs_coef * z + obs_noise
    return z, y


@dataclass(frozen=True)
class OutlierInjection:
    observations: np.ndarray
    indices: np.ndarray


def inject_outliers(observations, prob: float, level_set, seed) -> OutlierInjection:
    """Replace each observation independently with probability ``prob`` by a
    level drawn uniformly from ``level_set``. Returns the new series plus the
    replaced indices (0-based)."""
    if not 0 < prob < 1:
        raise ValueError("prob must lie strictly between 0 and 1")
    levels = np.asarray(level_set, dtype=float).ravel()
    if levels.size == 0:
        raise ValueError("level_set must be nonempty")
    obs = np.asarray(observations, dtype=float).copy()
    rng = np.random.default_rng(seed)
    hit = rng.random(obs.size) < prob
    indices = np.flatnonzero(hit)
    obs[indices] = levels[rng.integers(0, levels.size, size=indices.size)]
    return OutlierInjection(observations=obs, indices=indices)


def sample_stable(xi1: float, xi2: float, xi3: float,
                  rng: np.random.Generator, size=None):
    """Draw from the alpha-stable law with scale xi1, skewness xi2 and
    stability xi3, location 0, in the standard S1 parameterisation, via the
    Chambers-Mallows-Stuck construction (dedicated xi3 == 1 branch).

    Returns a float when ``size`` is None, else an array.
    """
    if not xi1 > 0:
        raise ValueError("scale xi1 must be positive")
    if not -1.0 <= xi2 <= 1.0:
        raise ValueError("skewness xi2 must lie in [-1, 1]")
    if not 0.0 < xi3 <= 2.0:
        raise ValueError("stability xi3 must lie in (0, 2]")
    alpha, beta, scale = xi3, xi2, xi1
    shape = () if size is None else size
    u = np.pi * (rng.random(shape) - 0.5)
    w = rng.standard_exponential(shape)
    if alpha == 1.0:
        half = np.pi / 2.0
        z = (1.0 / half) * (
            (half + beta * u) * np.tan(u)
            - beta * np.log((half * w * np.cos(u)) / (half + beta * u))
        )
        # S1 keeps location 0 through a skewness-dependent shift of scale*z.
        x = scale * z + (2.0 / np.pi) * beta * scale * math.log(scale)
    else:
        shift = math.atan(beta * math.tan(np.pi * alpha / 2.0)) / alpha
        amplitude = (1.0 + beta**2 * math.tan(np.pi * alpha / 2.0) ** 2) ** (1.0 / (2.0 * alpha))
        z = (
            amplitude
            * np.sin(alpha * (u + shift))
            / np.cos(u) ** (1.0 / alpha)
            * (np.cos(u - alpha * (u + shift)) / w) ** ((1.0 - alpha) / alpha)
        )
        x = scale * z
    return float(x) if size is None else x


@dataclass(frozen=True)
class StableSvParams:
    """Stochastic-volatility model with stable observation noise.

    Y_n = eps_n * beta * exp(Z_n), Z_n = phi Z_{n-1} + V_n, V_n ~ N(0, c),
    eps_n stable with scale xi1, skewness xi2, stability xi3.
    """

    beta: float
    c: float
    phi: float
    xi1: float = 1.0
    xi2: float = 1.0
    xi3: float = 1.75

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("latent variance c must be positive")
        if not self.xi1 > 0:
            raise ValueError("scale xi1 must be positive")
        if not -1.0 <= self.xi2 <= 1.0:
            raise ValueError("skewness xi2 must lie in [-1, 1]")
        if not 0.0 < self.xi3 <= 2.0:
            raise ValueError("stability xi3 must lie in (0, 2]")


def sv_latent_sampler(theta: Theta, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    c = theta["c"]
    if not c > 0:
        raise ValueError("latent variance c must be positive")
    return theta["phi"] * z + math.sqrt(c) * rng.standard_normal(z.shape[0])


def sv_obs_sampler(theta: Theta, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    noise = sample_stable(theta["xi1"], theta["xi2"], theta["xi3"], rng, size=z.shape[0])
    return noise * theta["beta"] * np.exp(z)


def sv_abc_hmm(observations, epsilon: float, xi1: float, xi2: float, xi3: float,
               z0: float = 0.0) -> AbcHmm:
    """Stable-volatility ABC-HMM with theta = (beta, c, phi) left free."""
    return AbcHmm(
        latent_sampler=sv_latent_sampler,
        obs_sampler=sv_obs_sampler,
        epsilon=epsilon,
        observations=observations,
        initial_latent=z0,
        fixed={"xi1": xi1, "xi2": xi2, "xi3": xi3},
    )


def sv_simulate(params: StableSvParams, horizon: int, seed) -> tuple:
    """Simulate (latent, observations) for the stable-volatility model."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = np.random.default_rng(seed)
    latent_noise = math.sqrt(params.c) * rng.standard_normal(horizon)
    z = np.empty(horizon)
    previous = 0.0
    for n in range(horizon):
        previous = params.phi * previous + latent_noise[n]
        z[n] = previous
    noise = sample_stable(params.xi1, params.xi2, params.xi3, rng, size=horizon)
    y = noise * params.beta * np.exp(z)
    return z, y


def lg_abc_obs_density(params: LinearGaussianParams, y: float, z, epsilon: float):
    """Closed-form smoothed observation density for the linear-Gaussian family.

    The mass of the open epsilon-ball around y under N(obs_coef * z,
    sigma_w2), divided by the ball width 2 * epsilon. Vectorised over z.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not params.sigma_w2 > 0:
        raise ValueError("sigma_w2 must be positive")
    sw = math.sqrt(params.sigma_w2)
    z = np.asarray(z, dtype=float)
    center = params.obs_coef * z
    upper = ndtr((y + epsilon - center) / sw)
    lower = ndtr((y - epsilon - center) / sw)
    return (upper - lower) / (2.0 * epsilon)


def load_returns_csv(path) -> np.ndarray:
    """Read a one-column price/index CSV and return its log-return series.

    The first row may be a text header (auto-detected). Each remaining row
    must hold exactly one numeric value; blank rows are skipped. A file with
    m usable values yields m - 1 log returns log(I_n / I_{n-1}).
    """
    values = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        for row_number, row in enumerate(reader, start=1):
            cells = [cell.strip() for cell in row if cell.strip() != ""]
            if not cells:
                continue
            if len(cells) != 1:
                raise ParseError(row_number, f"expected one value, found {len(cells)}")
            try:
                value = float(cells[0])
            except ValueError:
                if row_number == 1 and not values:
                    continue  # tolerated header line
                raise ParseError(row_number, f"not a number: {cells[0]!r}") from None
            values.append(value)
    if len(values) < 2:
        raise ParseError(0, "need at least two numeric rows to form returns")
    series = np.asarray(values, dtype=float)
    if np.any(series <= 0):
        raise NonPositiveIndex("index values must be strictly positive")
    return np.diff(np.log(series))
