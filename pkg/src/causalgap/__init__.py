"""Gaussian-likelihood scoring gaps for causal direction problems:
population quadrature, sample scoring, independence-test comparison, and
cause-effect pair analysis."""

__version__ = "0.1.0"

from .hsic import HsicResult, direction_by_dependence, hsic_statistic, hsic_test
from .npreg import SmootherFit, fit_mean, fit_variance, residual_variance
from .pairs import CauseEffectPair, PairMeta, fetch_pairs, load_pair, parse_meta, restrict_days
from .population import (
    GapReport,
    QuadratureConfig,
    backward_conditional_stats,
    curve,
    even_function_gap,
    population_gap,
    ratio_uniform_linear,
)
from .scoring import (
    DirectionReport,
    PermutationScore,
    gaussian_direction,
    permutation_score_population,
    permutation_score_sample,
    verify_theorem1,
)
from .sem import (
    BivariateAnm,
    LinearSem,
    Permutation,
    even_power,
    linear,
    population_covariance,
    power,
    random_linear_sem,
    sample_bivariate,
    sample_linear_sem,
)
from .specfun import (
    NoiseSpec,
    chi1_centered,
    gaussian,
    log_gamma,
    power_norm,
    sample,
    truncated_normal_moments,
    uniform,
)

__all__ = [
    "BivariateAnm",
    "CauseEffectPair",
    "DirectionReport",
    "GapReport",
    "HsicResult",
    "LinearSem",
    "NoiseSpec",
    "PairMeta",
    "Permutation",
    "PermutationScore",
    "QuadratureConfig",
    "SmootherFit",
    "backward_conditional_stats",
    "chi1_centered",
    "curve",
    "direction_by_dependence",
    "even_function_gap",
    "even_power",
    "fetch_pairs",
    "fit_mean",
    "fit_variance",
    "gaussian",
    "gaussian_direction",
    "hsic_statistic",
    "hsic_test",
    "linear",
    "load_pair",
    "log_gamma",
    "parse_meta",
    "permutation_score_population",
    "permutation_score_sample",
    "population_covariance",
    "population_gap",
    "power",
    "power_norm",
    "random_linear_sem",
    "ratio_uniform_linear",
    "residual_variance",
    "restrict_days",
    "sample",
    "sample_bivariate",
    "sample_linear_sem",
    "truncated_normal_moments",
    "uniform",
    "verify_theorem1",
]
