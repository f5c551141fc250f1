"""Exception types shared across the toolkit."""

from __future__ import annotations

import numpy as np


class ToolkitError(Exception):
    """Base class for every error raised on purpose by this package."""


class ConfigError(ToolkitError, ValueError):
    """Invalid configuration or constructor argument (CLI exit code 2)."""


class PreconditionError(ToolkitError, ValueError):
    """A check was asked to run outside the hypotheses it is valid under."""


class EvaluationError(ToolkitError, ArithmeticError):
    """A field or flux produced a non-finite value.

    ``point`` holds the first offending point so the caller can see where the
    evaluation broke down.
    """

    def __init__(self, message: str, point=None):
        self.point = None if point is None else np.asarray(point, dtype=float)
        if self.point is not None:
            message = f"{message} at point {np.array2string(self.point, precision=6)}"
        super().__init__(message)


class DegenerateGradientError(EvaluationError):
    """|grad_L u| fell below the regularization floor while p < 2."""


class EmptyRegionError(EvaluationError):
    """No quadrature sample landed in the requested region."""


def require_finite(values, points, what: str = "field"):
    """Raise :class:`EvaluationError` if ``values`` has a NaN/Inf entry."""
    values = np.asarray(values)
    if values.size and not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values.reshape(len(values), -1)))[0][0]
        raise EvaluationError(f"non-finite {what} value", np.atleast_2d(points)[bad])
    return values
