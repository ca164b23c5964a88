"""Log-signature transforms over piecewise-linear paths."""

from ._lordsig import (
    classification_metrics,
    logsig_dim,
    logsig_stream,
    logsignature,
    lyndon_words,
    pca_project,
    regression_metrics,
    signature,
)

__all__ = [
    "classification_metrics",
    "logsig_dim",
    "logsig_stream",
    "logsignature",
    "lyndon_words",
    "pca_project",
    "regression_metrics",
    "signature",
]
