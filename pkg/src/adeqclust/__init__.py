"""Robust Gaussian mixture clustering with an improper noise component and
bootstrap-adequacy selection of the number of clusters."""

from ._validation import DegenerateError
from .adequacy import (AdequacyClusterSelector, AdequacyRecord, SelectionReport, adequacy_test,
                       bootstrap_sample, select_clusters, simplicity, tau_location_scale)
from .io import emit_report, load_csv, standardize_columns
from .quality import (CalibrationTable, EvalGrid, QualityBreakdown, calibrate, default_calibration,
                      kde_weighted, quality_Q, standardized_q, symmetrize_discrepancy,
                      weighted_pc_scores)
from .rimle import (OTRIMLE, FitControl, MixtureParams, RimleFit, constrained_cov_update,
                    improper_density, kolmogorov_discrepancy, otrimle_fit, posteriors, rimle_em)
from .simulation import (adjusted_rand_index, gaussian_mixture_ic_baseline, generate_dgp,
                         run_benchmark)

__version__ = "0.1.0"

__all__ = [
    "AdequacyClusterSelector", "AdequacyRecord", "CalibrationTable", "DegenerateError",
    "EvalGrid", "FitControl", "MixtureParams", "OTRIMLE", "QualityBreakdown", "RimleFit",
    "SelectionReport", "adequacy_test", "adjusted_rand_index", "bootstrap_sample", "calibrate",
    "constrained_cov_update", "default_calibration", "emit_report", "gaussian_mixture_ic_baseline",
    "generate_dgp", "improper_density", "kde_weighted", "kolmogorov_discrepancy", "load_csv",
    "otrimle_fit", "posteriors", "quality_Q", "rimle_em", "run_benchmark", "select_clusters",
    "simplicity", "standardize_columns", "standardized_q", "symmetrize_discrepancy",
    "tau_location_scale", "weighted_pc_scores",
]
