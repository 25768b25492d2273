"""Proper local scoring rules and the heavy-tailed priors they induce.

The package builds second-order (and higher) local scoring rules from
convex generators, exposes the prior family whose score is identically
zero, and drives the MCMC studies that compare that family against
inverse-gamma and flat baselines on scalar, mixture, and hierarchical
models.
"""

from .errors import (
    ConfigError,
    DataValidationError,
    DevianceError,
    DomainError,
    GridMismatchError,
    ImproperPriorError,
    InitializationError,
    ResolutionError,
    ScorepriorError,
    SingularityError,
    StencilError,
)
from .grids import (
    DensityGrid,
    central_difference,
    exponential_grid,
    gaussian_grid,
    lomax_grid,
    trapezoid,
    uniform_grid,
)
from .scorerule import (
    ConvexGenerator,
    DecompositionResult,
    PhiGenerator,
    ScoreFunction,
    bregman_div_1d,
    bregman_div_2d,
    check_convexity,
    decomposition_check,
    euler_lagrange_residual,
    hyvarinen_score,
    inverse_square_generator,
    log_score,
    new_prior_score,
    propriety_check,
    score_order2,
    score_order_m,
    solve_score_zero,
    square_generator,
)
from .priors import (
    ComparatorPrior,
    ScorePriorPositive,
    ScorePriorReal,
    invariance_check,
    prior_score_residual,
)
from .models import (
    EightSchoolsData,
    GalaxyData,
    HierarchicalState,
    LogNormalLocationModel,
    MixtureModel,
    NormalScaleModel,
    REPEAT_MIXTURES,
    SINGLE_SAMPLE_MIXTURE,
    load_galaxy_data,
    loglik_hierarchical,
    loglik_lognormal_loc,
    loglik_mixture,
    loglik_normal_scale,
    sample_mixture,
)
from .mcmc import (
    Chain,
    McmcConfig,
    MixturePriors,
    chain_rng,
    data_rng,
    hierarchical_sampler,
    mwg_mixture,
    relabel_by_mean,
    relabel_by_weight,
    rw_metropolis,
)
from .evaluate import (
    ExperimentReport,
    ReplicationPlan,
    coverage95,
    dic,
    galaxy_dic_study,
    mixture_repeat_study,
    mixture_single_run,
    mse,
    normalized_rmse,
    run_replication,
    schools_study,
    write_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ScorepriorError", "DomainError", "SingularityError", "GridMismatchError",
    "StencilError", "ResolutionError", "ImproperPriorError",
    "DataValidationError", "ConfigError", "InitializationError",
    "DevianceError",
    "DensityGrid", "uniform_grid", "trapezoid", "central_difference",
    "gaussian_grid", "exponential_grid", "lomax_grid",
    "ConvexGenerator", "PhiGenerator", "ScoreFunction", "square_generator",
    "inverse_square_generator", "hyvarinen_score", "new_prior_score",
    "log_score", "score_order2", "score_order_m", "bregman_div_1d",
    "bregman_div_2d", "decomposition_check", "DecompositionResult",
    "propriety_check", "euler_lagrange_residual", "check_convexity",
    "solve_score_zero",
    "ScorePriorPositive", "ScorePriorReal", "ComparatorPrior",
    "invariance_check", "prior_score_residual",
    "NormalScaleModel", "LogNormalLocationModel", "MixtureModel",
    "loglik_normal_scale", "loglik_lognormal_loc", "loglik_mixture",
    "sample_mixture", "EightSchoolsData", "HierarchicalState",
    "loglik_hierarchical", "GalaxyData", "load_galaxy_data",
    "SINGLE_SAMPLE_MIXTURE", "REPEAT_MIXTURES",
    "McmcConfig", "Chain", "rw_metropolis", "MixturePriors", "mwg_mixture",
    "relabel_by_weight", "relabel_by_mean", "hierarchical_sampler",
    "data_rng", "chain_rng",
    "normalized_rmse", "mse", "coverage95", "dic", "ReplicationPlan",
    "ExperimentReport", "run_replication", "mixture_single_run",
    "mixture_repeat_study", "galaxy_dic_study", "schools_study", "write_csv",
]
