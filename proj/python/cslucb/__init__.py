"""Conservative linear UCB with context distributions."""

from ._core import (
    baseline_kth_best,
    beta,
    default_config,
    elliptical_potential_bound,
    lcb_value,
    lemma2_bound,
    nT_lower_bound,
    nT_upper_bound,
    quadratic_expected_features,
    quadratic_features,
    ridge_fit,
    run_experiment,
    run_trial,
    total_regret_bound,
    train_surrogate,
    ucb_regret_bound,
    ucb_value,
)

__all__ = [
    "baseline_kth_best",
    "beta",
    "default_config",
    "elliptical_potential_bound",
    "lcb_value",
    "lemma2_bound",
    "nT_lower_bound",
    "nT_upper_bound",
    "quadratic_expected_features",
    "quadratic_features",
    "ridge_fit",
    "run_experiment",
    "run_trial",
    "total_regret_bound",
    "train_surrogate",
    "ucb_regret_bound",
    "ucb_value",
]
