"""Spectral solvers for proportional-hazards survival regression.

The package fits Cox-type models by alternating a Markov-chain score
subproblem with max-entropy predictor refits, alongside the classical
nonparametric estimators, direct gradient-descent baselines, censoring-
robust metrics, synthetic generators, and a batch-bias analyzer.
"""

from .data import (
    Journey,
    JourneyDataset,
    Observation,
    RiskSet,
    SurvivalDataset,
    load_csv,
    load_journeys,
    risk_set,
    train_test_split_indices,
    write_csv,
    write_journeys,
)
from .extensions import (
    AftResult,
    ClassBaselineResult,
    HeterogeneousLinearExp,
    HeterogeneousResult,
    aft_fit,
    censor_decay_weights,
    counting_process_fit,
    dhh_fit,
    flatten_journeys,
    heterogeneous_fit,
    weighted_cox_fit,
)
from .generate import CalibrationError, generate_ads, generate_linear_cox
from .likelihood import (
    LossReport,
    bias_closed_form,
    bias_empirical,
    nll,
    nll_gradient_linear,
    nll_minibatch,
    nll_score_gradient,
)
from .metrics import (
    auc_at,
    censoring_survival,
    concordance_index,
    integrated_auc,
    ipcw_weights,
    rmse_vs_km,
)
from .models import (
    ClassBaselineCoxPH,
    CountingProcessRanker,
    GradientCoxPH,
    HeterogeneousCoxPH,
    SpectralAFT,
    SpectralCoxPH,
)
from .nonparametric import (
    KERNELS,
    SmoothedHazard,
    StepFunction,
    breslow_aft,
    breslow_baseline,
    breslow_class,
    default_bandwidth,
    kaplan_meier,
    kernel_function,
    nelson_aalen,
    smoothed_hazard,
)
from .predictors import (
    FeedForward,
    FitConfig,
    LinearExp,
    StepSizeError,
    gd_mle_fit,
    load_predictor,
    max_entropy_fit,
    max_entropy_objective,
    predict_scores,
    save_predictor,
)
from .spectral import (
    AdmmResult,
    Contests,
    SolverError,
    TransitionRates,
    admm_fit,
    comparison_rates,
    correction_rates,
    iterative_spectral_ranking,
    journey_contests,
    penalty_gradient,
    solve_scores,
    stationarity_residual,
    steady_state,
    subproblem_value,
    survival_contests,
    transition_rates,
    winner_loser_sets,
)

__version__ = "0.1.0"

__all__ = [
    "AdmmResult",
    "AftResult",
    "CalibrationError",
    "ClassBaselineCoxPH",
    "ClassBaselineResult",
    "Contests",
    "CountingProcessRanker",
    "FeedForward",
    "FitConfig",
    "GradientCoxPH",
    "HeterogeneousCoxPH",
    "HeterogeneousLinearExp",
    "HeterogeneousResult",
    "Journey",
    "JourneyDataset",
    "KERNELS",
    "LinearExp",
    "LossReport",
    "Observation",
    "RiskSet",
    "SmoothedHazard",
    "SolverError",
    "SpectralAFT",
    "SpectralCoxPH",
    "StepFunction",
    "StepSizeError",
    "SurvivalDataset",
    "TransitionRates",
    "admm_fit",
    "aft_fit",
    "auc_at",
    "bias_closed_form",
    "bias_empirical",
    "breslow_aft",
    "breslow_baseline",
    "breslow_class",
    "censor_decay_weights",
    "censoring_survival",
    "comparison_rates",
    "concordance_index",
    "correction_rates",
    "counting_process_fit",
    "default_bandwidth",
    "dhh_fit",
    "flatten_journeys",
    "gd_mle_fit",
    "generate_ads",
    "generate_linear_cox",
    "heterogeneous_fit",
    "integrated_auc",
    "ipcw_weights",
    "iterative_spectral_ranking",
    "journey_contests",
    "kaplan_meier",
    "kernel_function",
    "load_csv",
    "load_journeys",
    "load_predictor",
    "max_entropy_fit",
    "max_entropy_objective",
    "nelson_aalen",
    "nll",
    "nll_gradient_linear",
    "nll_minibatch",
    "nll_score_gradient",
    "penalty_gradient",
    "predict_scores",
    "risk_set",
    "rmse_vs_km",
    "save_predictor",
    "smoothed_hazard",
    "solve_scores",
    "stationarity_residual",
    "steady_state",
    "subproblem_value",
    "survival_contests",
    "train_test_split_indices",
    "transition_rates",
    "weighted_cox_fit",
    "winner_loser_sets",
    "write_csv",
    "write_journeys",
]
