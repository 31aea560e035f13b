"""Multi-label image classification with attentional parcels and pairwise relations."""

from ._relparcel import (
    ConfigError,
    DataError,
    Dataset,
    DimensionError,
    Model,
    binarize,
    dataset_metrics,
    evaluate,
    f_beta,
    generate_dataset,
    grad_check_suite,
    load_dataset,
    load_model,
    run_cli,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Dataset",
    "DimensionError",
    "Model",
    "binarize",
    "dataset_metrics",
    "evaluate",
    "f_beta",
    "generate_dataset",
    "grad_check_suite",
    "load_dataset",
    "load_model",
    "run_cli",
    "train",
]
