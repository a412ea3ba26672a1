"""Quermassintegral stability toolkit for radial graphs over the sphere."""

from ._common import DomainError, NormalizationError, PoleError, ResolutionError

__version__ = "0.1.0"

__all__ = ["DomainError", "NormalizationError", "PoleError", "ResolutionError", "__version__"]
