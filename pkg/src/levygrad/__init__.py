"""Gradient estimates and gradient bounds for Levy-driven Ornstein-Uhlenbeck semigroups."""

__version__ = "0.1.0"

from .bernstein import (
    Divergent,
    Log,
    LogPower,
    Power,
    PowerComposition,
    ScaledSum,
    bernstein_power,
    eval_alpha,
    eval_log_alpha,
    eval_S,
    eval_S_prime,
)
from .bounds import (
    BoundReport,
    bound_cor13,
    bound_cor22,
    bound_G,
    bound_G2,
    bound_thm31,
    fit_decay_rate,
)
from .catalog import MODEL_NAMES, load_model, named_model
from .densities import FloorDensity, GaussianDensity, JumpDensity, LowerBoundSpec
from .errors import (
    AccuracyError,
    ConfigError,
    DomainError,
    GridError,
    LevyGradError,
    NumericalError,
    UndefinedPointError,
    UnsupportedError,
)
from .estimators import (
    GradientEstimate,
    MCEstimate,
    decomposition_check,
    derivative_formula,
    estimate_Pt,
    estimate_Pt1,
    finite_difference,
    random_shift_check,
)
from .functions import TestFunction, parse_test_function, path_functional
from .levy_model import (
    CompoundPoissonJumps,
    LevyModel,
    SubordinatedBMComponent,
    constants_c0_lambda0,
    grad_density_integral,
    grad_log_density,
    integrated_symbol,
    rho0_floor,
    stable_isotropic,
    symbol_eta,
)
from .perturbation import PerturbationKernel, Rate, Redistribution, duhamel_solve, sigma_apply, simulate_perturbed
from .sampling import (
    RngStream,
    integrate_ou,
    sample_compound_poisson,
    sample_subordinated_bm,
    sample_subordinator,
)
from .spectral import DensityTable, density_from_cf, semigroup_and_gradient, sup_gradient
