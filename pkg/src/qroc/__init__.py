"""Covariate-adjusted specificity at controlled sensitivity.

Quantile-regression thresholds for a continuous biomarker, the pooled
specificity they induce, the full sensitivity-indexed coefficient path
and ROC curve, monotonicity repair, sample-based and bootstrap
inference, simultaneous bands, and a simulation harness.
"""

from .data import (BiomarkerDataset, CaseSample, ControlSample, load_csv,
                   write_csv)
from .errors import (ExtremeQuantileError, InferenceError, ParseError,
                     QrocError, SingularDesignError, SolverError,
                     ValidationError)
from .inference import (BandEstimate, CiPair, CovarianceEstimate,
                        bootstrap_variance, confidence_band, pointwise_ci,
                        sample_variance, z_value)
from .monotone import (MonotonePath, MonotoneRoc, monotonize_path,
                       monotonize_roc)
from .qreg import (CoefficientPath, QuantileSolution, check_loss,
                   estimating_residual, fit_path, fit_quantile)
from .roc import (RocCurve, SpecificityEstimate, adjusted_roc,
                  covariate_thresholds, pooled_specificity, swap_roles,
                  unadjusted_roc)
from .simulate import (ScenarioConfig, SimulationReport, gen_cases,
                       gen_controls, run_scenario, true_beta,
                       true_specificity)

__version__ = "0.1.0"

__all__ = [
    "BandEstimate",
    "BiomarkerDataset",
    "CaseSample",
    "CiPair",
    "CoefficientPath",
    "ControlSample",
    "CovarianceEstimate",
    "ExtremeQuantileError",
    "InferenceError",
    "MonotonePath",
    "MonotoneRoc",
    "ParseError",
    "QrocError",
    "QuantileSolution",
    "RocCurve",
    "ScenarioConfig",
    "SimulationReport",
    "SingularDesignError",
    "SolverError",
    "SpecificityEstimate",
    "ValidationError",
    "adjusted_roc",
    "bootstrap_variance",
    "check_loss",
    "confidence_band",
    "covariate_thresholds",
    "estimating_residual",
    "fit_path",
    "fit_quantile",
    "gen_cases",
    "gen_controls",
    "load_csv",
    "monotonize_path",
    "monotonize_roc",
    "pointwise_ci",
    "pooled_specificity",
    "run_scenario",
    "sample_variance",
    "swap_roles",
    "true_beta",
    "true_specificity",
    "unadjusted_roc",
    "write_csv",
    "z_value",
]
