from __future__ import annotations

import os
from math import gamma, pi


class ResolutionError(RuntimeError):
    """Successive quadrature refinements disagree beyond tolerance."""


class NormalizationError(RuntimeError):
    """Volume/barycenter normalization did not converge."""


class DomainError(ValueError):
    """The radial graph is invalid (1 + u <= 0)."""


class PoleError(ValueError):
    """Pointwise evaluation requested at theta in {0, pi} without a limit."""


def sphere_area(n: int) -> float:
    """|S^n|, the n-dimensional area of the unit sphere in R^{n+1}."""
    return 2.0 * pi ** ((n + 1) / 2) / gamma((n + 1) / 2)


def ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d."""
    return pi ** (d / 2) / gamma(d / 2 + 1)


def max_workers() -> int:
    """Thread cap from QUERMASS_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("QUERMASS_THREADS", "1")))
    except ValueError:
        return 1
