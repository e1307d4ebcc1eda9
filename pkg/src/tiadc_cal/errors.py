"""Exception hierarchy shared by the whole package.

Every error raised on purpose derives from TiadcError so callers (and the
command-line layer) can map failures onto exit codes without matching on
message text.
"""


class TiadcError(Exception):
    """Base class for all package errors."""


class ConfigError(TiadcError):
    """Invalid configuration, option, or argument combination."""


class ShapeError(ConfigError):
    """Array/stream shape or length does not satisfy a precondition."""


class DataFormatError(TiadcError):
    """A capture file (or other serialized input) is malformed."""


class NumericError(TiadcError):
    """A numeric procedure failed to produce a usable result."""


class DegenerateFitError(NumericError):
    """Sine fit input carries no resolvable tone (e.g. constant data)."""


class ConvergenceError(NumericError):
    """Iterative fit did not converge; carries the last iterate."""

    def __init__(self, message, last_fit=None):
        super().__init__(message)
        self.last_fit = last_fit


class PhaseAmbiguityError(NumericError):
    """Skew cannot be unwrapped to a unique branch."""


class CoherenceError(NumericError):
    """Requested coherent analysis of a non-coherent capture."""


class TapOverflowError(NumericError):
    """Filter tap magnitude exceeds the fixed-point format range."""
