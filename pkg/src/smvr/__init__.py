"""Stochastic multi-level compositional optimization.

The functional API (``smvr_run``, ``stagewise_run``, ``adaptive_smvr_run``,
``nested_sgd_run``, ``scsc_style_run``) operates on a
:class:`CompositionProblem`; the estimator classes in :mod:`smvr.base` and
:mod:`smvr.models` wrap it in scikit-learn conventions.
"""

from .algorithms import adaptive_smvr_run, estimate_rate_exponent, smvr_run, stagewise_run
from .base import SMVR, AdaptiveSMVR, NestedSGD, SCSCStyle, StagewiseSMVR
from .baselines import nested_sgd_run, plugin_gradient, scsc_style_run
from .core import (CompositionProblem, DimensionChain, FunctionLevel, LevelConstants,
                   LevelSample, StochasticLevel, draw_samples, evaluate_exact, forward_exact,
                   gradient_exact, smoothness_constant)
from .data_io import (ReturnsTable, load_industry_csv, read_trace, synth_classification,
                      synth_returns, write_trace)
from .estimators import (EstimatorStack, LevelEstimatorState, advance_stack, assemble_gradient,
                         init_stack, project_ball, storm_jacobian_update, storm_value_update)
from .exceptions import (AlignmentError, ConfigurationError, ContractViolation, DomainError,
                         InsufficientDataError, ParseError, SMVRError)
from .harness import ExperimentConfig, compare_report, run_experiment
from .models import HierarchicalTERMClassifier, MeanDeviationPortfolio
from .problems import (build_hierarchical_term, build_portfolio, build_synthetic,
                       portfolio_objective, term_objective)
from .schedules import AdaptiveScaler, ConstantSchedule, SmvrSchedule, StageSchedule
from .trace import RunResult, RunTrace

__version__ = "0.1.0"

__all__ = [
    "AdaptiveSMVR", "AdaptiveScaler", "AlignmentError", "CompositionProblem",
    "ConfigurationError", "ConstantSchedule", "ContractViolation", "DimensionChain",
    "DomainError", "EstimatorStack", "ExperimentConfig", "FunctionLevel",
    "HierarchicalTERMClassifier", "InsufficientDataError", "LevelConstants",
    "LevelEstimatorState", "LevelSample", "MeanDeviationPortfolio", "NestedSGD", "ParseError",
    "ReturnsTable", "RunResult", "RunTrace", "SCSCStyle", "SMVR", "SMVRError", "SmvrSchedule",
    "StageSchedule", "StagewiseSMVR", "StochasticLevel", "adaptive_smvr_run", "advance_stack",
    "assemble_gradient", "build_hierarchical_term", "build_portfolio", "build_synthetic",
    "compare_report", "draw_samples", "estimate_rate_exponent", "evaluate_exact",
    "forward_exact", "gradient_exact", "init_stack", "load_industry_csv", "nested_sgd_run",
    "plugin_gradient", "portfolio_objective", "project_ball", "read_trace", "run_experiment",
    "scsc_style_run", "smoothness_constant", "smvr_run", "stagewise_run", "storm_jacobian_update",
    "storm_value_update", "synth_classification", "synth_returns", "term_objective",
    "write_trace",
]
