"""Nonparametric estimation of generalized mutual information.

Leave-one-out KDE plug-in estimators for continuous, mixed and general
mixed data, optimally weighted ensembles of them, resampling confidence
intervals, synthetic truncated-Gaussian benchmarks and the ``miest`` CLI.
"""

__version__ = "0.1.0"

from .core import (BandwidthSet, Case, Dataset, EstimateReport, Functional,
                   FunctionalKind, KernelSpec, MIEstError, Profile, functional_eval,
                   kernel_eval, renyi, shannon)
from .core import (DegenerateDataset, InfeasibleError, MissingContinuousY,  # noqa: F401
                   MissingParts, NoFeasibleRange, NonPositiveArgument,
                   NonPositiveInput, OutOfBox, RejectionStall, SingletonClass,
                   ToleranceNotMet, TooFewSamples, UnsafeKernelError,
                   UnsupportedDimension)
from .kde import (KdeContext, kde_conditional_x_given_y, kde_joint, kde_marginal_x,
                  kde_marginal_y, loo_density, loo_sums)
from .plugin import (PluginConfig, SingletonPolicy, plugin_mi_cont, plugin_mi_mixed,
                     plugin_mi_mixed_general)
from .ensemble import (BasisFamily, EnsembleConfig, EtaPolicy, Program, SolverStatus,
                       WeightSolution, bandwidth_schedule, build_constraint_matrix,
                       ensemble_estimate_cont, ensemble_estimate_mixed,
                       select_parameters, solve_weights, solve_weights_exact,
                       solve_weights_relaxed)
from .inference import ConfidenceReport, confidence_interval, normality_diagnostic
from .synthetic import (TruncGaussMixtureSpec, case1_spec, case2_spec, exact_density,
                        oracle_mi, sample)
from .bench import (BenchPlan, BenchResult, EstimatorSpec, emit_results,
                    fit_loglog_slope, load_plan, run_bench)
from .io import read_dataset, write_dataset

__all__ = [
    "BandwidthSet", "Case", "Dataset", "EstimateReport", "Functional", "FunctionalKind",
    "KernelSpec", "MIEstError", "Profile", "functional_eval", "kernel_eval", "renyi",
    "shannon", "KdeContext", "kde_conditional_x_given_y", "kde_joint", "kde_marginal_x",
    "kde_marginal_y", "loo_density", "loo_sums", "PluginConfig", "SingletonPolicy",
    "plugin_mi_cont", "plugin_mi_mixed", "plugin_mi_mixed_general", "BasisFamily",
    "EnsembleConfig", "EtaPolicy", "Program", "SolverStatus", "WeightSolution",
    "bandwidth_schedule", "build_constraint_matrix", "ensemble_estimate_cont",
    "ensemble_estimate_mixed", "select_parameters", "solve_weights",
    "solve_weights_exact", "solve_weights_relaxed", "ConfidenceReport",
    "confidence_interval", "normality_diagnostic", "TruncGaussMixtureSpec",
    "case1_spec", "case2_spec", "exact_density", "oracle_mi", "sample", "BenchPlan",
    "BenchResult", "EstimatorSpec", "emit_results", "fit_loglog_slope", "load_plan",
    "run_bench", "read_dataset", "write_dataset",
]
