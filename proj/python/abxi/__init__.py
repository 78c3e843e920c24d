"""Python bindings for the abxi recommender core.

Configs are passed as plain dicts using the same keys as the JSON run
configs; omitted keys keep their defaults.
"""

from ._abxi import (
    AbxiError,
    ConfigError,
    Corpus,
    DataError,
    Model,
    NumericalError,
    build_bundle,
    generate_synthetic,
    info_nce,
    load_checkpoint,
    metrics_from_ranks,
    model_config,
    parameter_count,
    rank_of,
    run_cli,
    train,
    variant_names,
)

__all__ = [
    "AbxiError",
    "ConfigError",
    "Corpus",
    "DataError",
    "Model",
    "NumericalError",
    "build_bundle",
    "generate_synthetic",
    "info_nce",
    "load_checkpoint",
    "metrics_from_ranks",
    "model_config",
    "parameter_count",
    "rank_of",
    "run_cli",
    "train",
    "variant_names",
]
