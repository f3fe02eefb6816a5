"""Rank-based control functions for binary response models with an endogenous regressor."""

from .control import ControlFunction, QuantileFamily, build, empirical_ranks, normal_quantile
from .data import Dataset
from .dgp import DgpConfig, generate, true_asf
from .exceptions import (
    BandwidthTooSmallError,
    CollinearityError,
    ConfigError,
    DegenerateTrimError,
    DomainError,
    NumericalError,
    ParseError,
    RankCFError,
    SchemaError,
    ShapeError,
    SingularDesignError,
    UnreliableBootstrapError,
    UnsupportedOperationError,
)
from .inference import CovarianceEstimate, delta_method_asf, pairs_bootstrap, t_statistics
from .liml import FitResult, Theta, asf_parametric
from .liml import fit as fit_liml
from .montecarlo import ExperimentConfig, MetricsTable, run_experiment, summarize
from .pipeline import Pipeline, estimator_for
from .semiparametric import SemiparamSpec, asf_nonparam, fit_semiparam

__version__ = "0.1.0"
