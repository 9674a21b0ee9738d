"""Personalized predictive models tuned on a calibration/discrimination mixture loss."""

from .data import Dataset, SplitPlan, load_csv, split_holdout, write_csv
from .glm import FitConfig, fit_weighted_logistic, predict_prob
from .metrics import PerformanceReport, brier_decomposition, full_report, mixture_loss
from .simgen import SimulationConfig, generate_dataset
from .similarity import WeightScheme, rank_by_similarity, select_top_m
from .tuner import TuningConfig, TuningResult, m_sweep, tune_alphas, tune_subpopulation_size
from .validator import ValidationConfig, ValidationReport, bca_interval, external_validate

__all__ = [
    "Dataset",
    "FitConfig",
    "PerformanceReport",
    "SimulationConfig",
    "SplitPlan",
    "TuningConfig",
    "TuningResult",
    "ValidationConfig",
    "ValidationReport",
    "WeightScheme",
    "bca_interval",
    "brier_decomposition",
    "external_validate",
    "fit_weighted_logistic",
    "full_report",
    "generate_dataset",
    "load_csv",
    "m_sweep",
    "mixture_loss",
    "predict_prob",
    "rank_by_similarity",
    "select_top_m",
    "split_holdout",
    "tune_alphas",
    "tune_subpopulation_size",
    "write_csv",
]
