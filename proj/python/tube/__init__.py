"""Three-stage unsupervised risk estimation from noisy labels (C++ core)."""

from ._core import (
    TubeError,
    expit,
    fit,
    fit_fractional_logistic,
    generate_dataset,
    logit,
    population_oracle,
    score_auc,
)

__all__ = [
    "TubeError",
    "expit",
    "fit",
    "fit_fractional_logistic",
    "generate_dataset",
    "logit",
    "population_oracle",
    "score_auc",
]
