"""Python bindings for the bgrass signal-detection engine."""

from ._bgrass import (
    ConfigError,
    auc,
    correlation,
    fit,
    laplacian,
    pg_mean,
    pg_variance,
    sample_pg,
    validate,
)

__all__ = [
    "ConfigError",
    "auc",
    "correlation",
    "fit",
    "laplacian",
    "pg_mean",
    "pg_variance",
    "sample_pg",
    "validate",
]
