"""Exact likelihood gradients and Hessians for linear Gaussian state-space models."""

from .derivfilter import run_gradient_filter
from .errors import (
    BadDimension,
    DegenerateVariance,
    EvaluationFailure,
    LineSearchFailure,
    MissingSecondDerivatives,
    NonpositiveInnovationVariance,
    NonStationary,
    ProbeFailure,
    SingularCovarianceSystem,
    SSMError,
)
from .hessfilter import fd_hessian, run_hessian_filter
from .kalman import LikelihoodReport, run_filter
from .models_arma import ArmaModel, simulate_arma, transform_arma_params
from .models_seasonal import SeasonalModel
from .optimize import OptimizerConfig, OptimizeResult, bfgs_maximize, check_gradient, fd_gradient
from .statespace import InitialCondition, ModelDims, ModelMatrices, ModelProvider, simulate, validate_model

__version__ = "0.1.0"
