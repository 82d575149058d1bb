"""Particle-importance-sampling maximum-likelihood estimation for
state-space models, with exact linear-Gaussian oracles and verification
diagnostics."""

from .kalman import (
    ConvergenceError,
    NotLinearGaussianError,
    kalman_conditional_score,
    kalman_loglik,
    kalman_mle,
    kalman_score,
)
from .models import (
    InvalidParameterError,
    MODEL_IDS,
    Parameter,
    Series,
    StateSpaceModel,
    get_model,
    load_series,
    save_series,
)
from .optimizers import (
    ALGORITHMS,
    OptimizerResult,
    RunConfig,
    StepSchedule,
    TrajectoryRecord,
    adapt_ga_pis,
    fisher_sga,
    naive_sga,
    run_algorithm,
    semi_ga_pis,
    spsa_gradient,
    tune_r1_online,
    tune_r_offline,
    vanilla_online_ga,
)
from .pis import (
    FarExtrapolationError,
    a_ess,
    log_is_weight,
    pis_score,
    retarget,
    smoothed_loglik_curve,
)
from .rng import stream
from .smc import (
    DegenerateCloudError,
    LoglikEstimate,
    ParticleCloud,
    conditional_score,
    ess,
    fisher_score,
    init_cloud,
    logmeanexp,
    maybe_resample,
    multinomial_resample,
    normalized_weights,
    propagate_weight,
    smc_run,
    smc_step,
    weighted_score,
)
from .harness import (
    ExperimentConfig,
    RmseReport,
    consistency_check,
    failure_count,
    rmse,
    run_experiment,
    variance_t0_check,
)

__version__ = "0.1.0"
