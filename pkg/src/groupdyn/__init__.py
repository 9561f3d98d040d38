"""Multiplicative group-behavior dynamics.

Simulates group adoption counts driven by individual Bernoulli actions,
verifies the lognormal and power-law limits of the process numerically,
estimates the model's parameters from partially observed event logs, and
applies estimated upward factors to information-burst prediction.
"""

from .burst import (
    BurstDataset,
    BurstLabelSeries,
    ClassifierModel,
    Metrics,
    SweepEntry,
    build_dataset,
    detect_bursts,
    evaluate,
    predict_proba,
    train_logreg,
    upward_factor_series,
    window_sweep,
)
from .errors import (
    ConfigError,
    DataFormatError,
    DegenerateModelError,
    DegeneratePairError,
    EstimationError,
    FitError,
    GroupDynError,
    NumericalError,
    OverflowTickError,
    TrainingError,
)
from .estimators import (
    FactorEstimate,
    GroupModelParams,
    MuEstimate,
    ObservedActions,
    PowerLawParams,
    estimate_factors,
    estimate_factors_pair,
    estimate_individual_model,
    estimate_mu,
    meso_to_macro,
    micro_to_meso,
    mixture_density,
    mixture_log_slope,
    predict_group_next,
    predict_log_counts,
    non_radical_exponent,
    winner_threshold,
)
from .fitting import (
    LognormalFit,
    PowerLawFit,
    QQPoints,
    geometric_bin_edges,
    lognormal_mle,
    powerlaw_fit,
    powerlaw_pvalue,
    qq_points,
    rss_geometric,
)
from .simulator import (
    EnsembleResult,
    FactorPair,
    GroupTrajectory,
    IndividualModel,
    SimulationConfig,
    TickTally,
    draw_tick,
    simulate_action,
    simulate_ensemble,
    step_group,
    substream,
)

__version__ = "0.1.0"
