"""Sequential Monte Carlo with indicator potentials.

The alive particle filter keeps drawing proposals at every step until a
fixed number of them land in the support of the potential, which yields an
unbiased normalizing-constant estimator even when acceptance probabilities
are tiny. The package bundles the filter, a standard bootstrap baseline
that can collapse, ABC state-space model builders, exact oracles for
validation, a pseudo-marginal MCMC sampler, and a config-driven
experiment runner.
"""

from .alive import (
    AliveStep,
    FilterRun,
    alive_init,
    alive_step,
    ancestral_path,
    filter_estimate,
    gamma_estimate,
    lgo_step,
    predictor_estimate,
    run_filter,
    sample_leaf,
)
from .baseline import (
    BaselineRun,
    BaselineStep,
    CollapseRecord,
    baseline_filter_estimate,
    multinomial_resample,
    run_standard_filter,
)
from .errors import (
    AllZeroWeights,
    CapExceeded,
    ConfigError,
    GridTooCoarse,
    InitFailed,
    InvalidMoments,
    LeanStepError,
    NonPositiveIndex,
    ParseError,
)
from .experiments import (
    ExperimentConfig,
    RelativeVarianceReport,
    relative_variance_report,
    rerun_from_manifest,
    run_experiment,
    uniform_indicator_model,
)
from .fk_core import (
    FeynmanKacModel,
    ModelDiagnostics,
    Particle,
    TestFunction,
    Trajectory,
    constant_one,
    validate_model,
)
from .models import (
    AbcHmm,
    LinearGaussianParams,
    OutlierInjection,
    StableSvParams,
    compile_abc_hmm,
    inject_outliers,
    latent_values,
    lg_abc_hmm,
    lg_abc_obs_density,
    lg_family_hmm,
    lg_simulate,
    load_returns_csv,
    sample_stable,
    sv_abc_hmm,
    sv_simulate,
)
from .oracles import (
    KalmanOutput,
    MonteCarloEstimate,
    PhiMoments,
    clt_variance_ideal,
    grid_abc_posterior,
    kalman_filter,
    nb_expectation_exact,
    nb_identity_exact,
    nb_identity_mc,
    nb_pair_identity_exact,
    nb_pair_identity_mc,
)
from .pmmh import (
    ChainRecord,
    ChainState,
    GammaProposal,
    GridPrior,
    GridProposal,
    InverseGammaPrior,
    NormalPrior,
    RandomWalkProposal,
    StepRecord,
    log_prior_density,
    pmmh_init,
    pmmh_step,
    run_alive_filter_once,
    run_chain,
    sample_prior,
    write_chain_manifest,
    write_trace_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AbcHmm",
    "AliveStep",
    "AllZeroWeights",
    "BaselineRun",
    "BaselineStep",
    "CapExceeded",
    "ChainRecord",
    "ChainState",
    "CollapseRecord",
    "ConfigError",
    "ExperimentConfig",
    "FeynmanKacModel",
    "FilterRun",
    "GammaProposal",
    "GridPrior",
    "GridProposal",
    "GridTooCoarse",
    "InitFailed",
    "InvalidMoments",
    "InverseGammaPrior",
    "KalmanOutput",
    "LeanStepError",
    "LinearGaussianParams",
    "ModelDiagnostics",
    "MonteCarloEstimate",
    "NonPositiveIndex",
    "NormalPrior",
    "OutlierInjection",
    "ParseError",
    "Particle",
    "PhiMoments",
    "RandomWalkProposal",
    "RelativeVarianceReport",
    "StableSvParams",
    "StepRecord",
    "TestFunction",
    "Trajectory",
    "alive_init",
    "alive_step",
    "ancestral_path",
    "baseline_filter_estimate",
    "clt_variance_ideal",
    "compile_abc_hmm",
    "constant_one",
    "filter_estimate",
    "gamma_estimate",
    "grid_abc_posterior",
    "inject_outliers",
    "kalman_filter",
    "latent_values",
    "lg_abc_hmm",
    "lg_abc_obs_density",
    "lg_family_hmm",
    "lg_simulate",
    "lgo_step",
    "load_returns_csv",
    "log_prior_density",
    "multinomial_resample",
    "nb_expectation_exact",
    "nb_identity_exact",
    "nb_identity_mc",
    "nb_pair_identity_exact",
    "nb_pair_identity_mc",
    "pmmh_init",
    "pmmh_step",
    "run_alive_filter_once",
    "predictor_estimate",
    "relative_variance_report",
    "rerun_from_manifest",
    "run_chain",
    "run_experiment",
    "run_filter",
    "run_standard_filter",
    "sample_leaf",
    "sample_prior",
    "sample_stable",
    "sv_abc_hmm",
    "sv_simulate",
    "uniform_indicator_model",
    "validate_model",
    "write_chain_manifest",
    "write_trace_csv",
]
