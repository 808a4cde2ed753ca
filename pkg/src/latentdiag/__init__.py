"""Diagnostics for whether learned latent representations encode ground-truth factors."""

__version__ = "0.1.0"

from .errors import DataError, LatentDiagError, NumericError  # noqa: E402

__all__ = ["DataError", "LatentDiagError", "NumericError", "__version__"]
