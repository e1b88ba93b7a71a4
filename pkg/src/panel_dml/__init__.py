"""Double/debiased machine learning for panel data with unobserved heterogeneity."""

from .boost import BoostConfig, BoostedModel, fit_boosted, fit_tuned, predict
from .crossfit import FoldPlan, Strategy, make_folds, training_rows
from .dgp import DgpConfig, FunctionalForm, SimulationTruth, Structure, generate
from .errors import ConfigError, DimensionError, EstimationError, PanelDmlError, SingularDesignError
from .estimators import EstimateResult, EstimatorSpec, Method, estimate
from .paneldata import DesignMatrix, PanelDataset, ols_fit, read_csv, write_csv

__version__ = "0.1.0"

__all__ = [
    "BoostConfig",
    "BoostedModel",
    "fit_boosted",
    "fit_tuned",
    "predict",
    "FoldPlan",
    "Strategy",
    "make_folds",
    "training_rows",
    "DgpConfig",
    "FunctionalForm",
    "SimulationTruth",
    "Structure",
    "generate",
    "ConfigError",
    "DimensionError",
    "EstimationError",
    "PanelDmlError",
    "SingularDesignError",
    "EstimateResult",
    "EstimatorSpec",
    "Method",
    "estimate",
    "DesignMatrix",
    "PanelDataset",
    "ols_fit",
    "read_csv",
    "write_csv",
]
