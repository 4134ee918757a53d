"""Predict the evolution of brain connectivity graphs with a cascade of graph GANs.

Graphs are square numpy float64 arrays: symmetric, zero diagonal, entries in
[0, 1]. Longitudinal subjects are ``(subject_id, [graph_t0, graph_t1, ...])``
tuples. Everything seeded is bit-reproducible across runs.
"""

from graphevo._core import (
    SIGMA_FLOOR,
    Cascade,
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    DomainError,
    NumericError,
    adversarial_loss_d,
    adversarial_loss_g,
    evaluate_fold,
    generate_synthetic,
    kfold_split,
    kl_gaussian,
    kl_gaussian_integrated,
    kl_loss,
    l1_loss,
    load_dataset,
    mae,
    node_strength,
    node_weight_stats,
    run_gradient_checks,
    save_dataset,
    symmetrize_clamp,
    topology_loss,
    validate,
)

__version__ = "1.0.0"

__all__ = [
    "SIGMA_FLOOR",
    "Cascade",
    "ConfigError",
    "ContractError",
    "DataError",
    "DimensionError",
    "DomainError",
    "NumericError",
    "adversarial_loss_d",
    "adversarial_loss_g",
    "evaluate_fold",
    "generate_synthetic",
    "kfold_split",
    "kl_gaussian",
    "kl_gaussian_integrated",
    "kl_loss",
    "l1_loss",
    "load_dataset",
    "mae",
    "node_strength",
    "node_weight_stats",
    "run_gradient_checks",
    "save_dataset",
    "symmetrize_clamp",
    "topology_loss",
    "validate",
]
