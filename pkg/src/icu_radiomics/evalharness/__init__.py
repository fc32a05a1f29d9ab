from .cv import stratified_kfold, train_indices
from .experiment import (
    AccessLog,
    ExperimentConfig,
    ExperimentReport,
    TransferResult,
    compare_reports,
    markdown_table,
    run_experiment,
    transfer_experiment,
    transfer_matrix_markdown,
)
from .logistic import LogisticModel, NonConvergence, fit_logistic, logistic_baseline, logistic_loss_grad
from .metrics import FPR_GRID, OperatingPoint, interpolate_roc, roc_auc, roc_curve, sensitivity_at_ppv
from .stats import mean_ci, one_tailed_paired_ttest
from .synth import SynthSpec, SyntheticCohort, synth_cohort, synth_site_a_table, synth_tabular, write_cohort

__all__ = [
    "AccessLog",
    "ExperimentConfig",
    "ExperimentReport",
    "FPR_GRID",
    "LogisticModel",
    "NonConvergence",
    "OperatingPoint",
    "SynthSpec",
    "SyntheticCohort",
    "TransferResult",
    "compare_reports",
    "fit_logistic",
    "interpolate_roc",
    "logistic_baseline",
    "logistic_loss_grad",
    "markdown_table",
    "mean_ci",
    "one_tailed_paired_ttest",
    "roc_auc",
    "roc_curve",
    "run_experiment",
    "sensitivity_at_ppv",
    "stratified_kfold",
    "synth_cohort",
    "synth_site_a_table",
    "synth_tabular",
    "train_indices",
    "transfer_experiment",
    "transfer_matrix_markdown",
    "write_cohort",
]
