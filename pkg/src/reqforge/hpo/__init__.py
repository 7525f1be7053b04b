"""Hyperparameter search: spaces, surrogates, strategies, statistics."""

from .loop import HPOTrace, Strategy, TrialRecord, default_setting, run_hpo
from .space import (
    ENCODED_DIM,
    SPACES,
    HyperparameterSetting,
    Optimizer,
    SampleBatch,
    Schedule,
    SearchSpace,
    SettingGrid,
    default_grid,
    encode,
    encode_batch,
    encode_settings,
    sample_batch,
    sample_uniform,
    setting_in_space,
    space_for_task,
    space_prompt_json,
)
from .stats import (
    BestOfK,
    CorrelationReport,
    Quartiles,
    best_of_k_stats,
    correlation_report,
    format_mean_std,
    pearson,
)
from .surrogates import (
    DEFAULT_POOL_SIZE,
    DEFAULT_XI,
    GPModel,
    RFModel,
    expected_improvement,
    fit_surrogate,
    predict,
    propose_next,
)

__all__ = [
    "ENCODED_DIM",
    "SPACES",
    "DEFAULT_POOL_SIZE",
    "DEFAULT_XI",
    "BestOfK",
    "CorrelationReport",
    "GPModel",
    "HPOTrace",
    "HyperparameterSetting",
    "Optimizer",
    "Quartiles",
    "RFModel",
    "SampleBatch",
    "Schedule",
    "SearchSpace",
    "SettingGrid",
    "Strategy",
    "TrialRecord",
    "best_of_k_stats",
    "correlation_report",
    "default_grid",
    "default_setting",
    "encode",
    "encode_batch",
    "encode_settings",
    "expected_improvement",
    "fit_surrogate",
    "format_mean_std",
    "pearson",
    "predict",
    "propose_next",
    "run_hpo",
    "sample_batch",
    "sample_uniform",
    "setting_in_space",
    "space_for_task",
    "space_prompt_json",
]
