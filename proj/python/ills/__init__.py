from ._core import (
    auc,
    impute_iteration,
    lstsq_min_norm,
    nrmse,
    run_experiment,
    run_ills,
    similarity,
    spread,
)

__all__ = [
    "auc",
    "impute_iteration",
    "lstsq_min_norm",
    "nrmse",
    "run_experiment",
    "run_ills",
    "similarity",
    "spread",
]
