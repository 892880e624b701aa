"""Reward fine-tuning of consistency models on toy Gaussian mixtures.

Thin Python view over the C++ core: schedules, mixture presets, closed-form
and quadrature divergences, the linear-Gaussian oracle, sliced W2, and
loading/sampling trained checkpoints.
"""

from ._rocmlab import (
    ConfigError,
    ConsistencyModel,
    GaussianMixture,
    NoiseSchedule,
    NumericError,
    divergence_quadrature,
    fisher_closed,
    fisher_trajectory_constant,
    hellinger_closed,
    js_mc,
    kl_closed,
    kl_trajectory_constant,
    oracle_objective,
    oracle_optimum,
    reverse_kl_closed,
    run_oracle_checks,
    sliced_w2,
)

__all__ = [
    "ConfigError",
    "ConsistencyModel",
    "GaussianMixture",
    "NoiseSchedule",
    "NumericError",
    "divergence_quadrature",
    "fisher_closed",
    "fisher_trajectory_constant",
    "hellinger_closed",
    "js_mc",
    "kl_closed",
    "kl_trajectory_constant",
    "oracle_objective",
    "oracle_optimum",
    "reverse_kl_closed",
    "run_oracle_checks",
    "sliced_w2",
]
