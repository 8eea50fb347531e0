"""Exception types raised across the toolkit.

Argument-contract violations derive from ValueError so callers can catch
either the specific class or the builtin.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all toolkit-specific errors."""


class ParseError(ToolkitError, ValueError):
    """A CSV row could not be parsed.  Carries the 1-based row number."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class DuplicateTimestampError(ParseError):
    """Two input rows landed on the same time slot."""


class EmptyOverlapError(ToolkitError, ValueError):
    """Two series share no usable common time range."""


class ResolutionError(ToolkitError, ValueError):
    """A series resolution is incompatible with the requested operation."""


class UndefinedCorrelationError(ToolkitError, ValueError):
    """Correlation is undefined (zero variance or too few paired samples)."""


class ZeroInsolationError(ToolkitError, ValueError):
    """Performance ratio is undefined because summed irradiance is zero."""


class UndefinedPpiError(ToolkitError, ValueError):
    """Power performance index is undefined (non-positive estimate)."""


class SpectrumKindError(ToolkitError, ValueError):
    """A harmonic-spectrum operation got the wrong spectrum kind."""


class TopologyError(ToolkitError, ValueError):
    """Feeder graph contains a cycle or otherwise is not a radial tree."""


class ConnectivityError(TopologyError):
    """A bus is not reachable from the source bus."""


class PowerFlowDivergenceError(ToolkitError):
    """The sweep solver failed to converge.  Carries the mismatch trace."""

    def __init__(self, message: str, trace: list[float] | None = None):
        super().__init__(message)
        self.trace = trace or []


class ControlOscillationError(ToolkitError):
    """A voltage-control device toggled back and forth within one timestep."""


class SingularFitError(ToolkitError, ValueError):
    """Regression design matrix is rank deficient or under-determined."""


class FitFailureError(ToolkitError):
    """Nonlinear fit failed to produce a finite model.

    ``partial`` holds the best model found before failure, when any.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigError(ToolkitError, ValueError):
    """Scenario configuration is invalid.  Carries the offending keys."""

    def __init__(self, message: str, keys: list[str] | None = None):
        super().__init__(message)
        self.keys = keys or []
