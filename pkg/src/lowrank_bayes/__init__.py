"""Exact and optimally rank-reduced Gaussian posteriors for linear Gaussian
inverse problems, with closed-form losses under KL, Renyi, Amari, and
Hellinger divergences."""

from .approx import (
    JointApproximation,
    OptimalCovariance,
    OptimalMean,
    ProjectedProblem,
    ProjectionReport,
    covariance_loss,
    joint_approximation,
    loss_exponent,
    mean_divergence_loss,
    mean_loss_hs_oracle,
    optimal_covariance,
    optimal_mean,
    optimal_projector,
    projection_interpretation,
)
from .bayes import (
    InverseProblem,
    Posterior,
    PosteriorSpectrum,
    SpectralPrior,
    data_covariance,
    hessian,
    posterior,
    posterior_covariance,
    problem_from_json,
    problem_to_json,
    spectrum,
    variance_reduction,
)
from .bench import ExperimentConfig, LossRow, LossTable, project_and_compare, run_sweep
from .errors import (
    DegeneracyError,
    DomainError,
    InputValidationError,
    LowRankBayesError,
    QuadratureError,
    RangeViolationError,
    SingularityError,
)
from .linalg import (
    ReducedRankSolution,
    Svd,
    generalized_reduced_rank,
    pinv,
    svd,
    truncated_svd,
)
from .measures import (
    DivergenceSpec,
    FeldmanHajekOperator,
    GaussianMeasure,
    divergence,
    f_kl,
    fh_operator,
    logdet2,
    mean_shift_loss,
)
from .problems import (
    DeconvolutionConfig,
    HeatConfig,
    build_deconvolution,
    build_heat,
    sample_data,
)
from .rng import CounterRng

__version__ = "0.1.0"
