"""Exception hierarchy shared by the solver, analysis and CLI layers."""


class PinchflowError(Exception):
    """Base class for all package errors."""


class FrameError(PinchflowError, ValueError):
    """A frame transform was asked for a time outside its domain."""


class InvalidWindowError(PinchflowError, ValueError):
    """Window radius requested outside ``tau > max(1, xi0)``."""


class StepRejected(PinchflowError):
    """A time step violated positivity or the gradient bound.

    ``reason`` is ``"positivity"`` or ``"gradient"``.
    """

    def __init__(self, reason: str, message: str = ""):
        super().__init__(message or reason)
        self.reason = reason


class InsufficientSamplesError(PinchflowError, ValueError):
    pass


class NoRootError(PinchflowError, ValueError):
    """The matching equation has no root for the given radius."""


class FitError(PinchflowError, ValueError):
    pass


class ResolutionError(PinchflowError, ValueError):
    """A requested radius or time lies outside what a run resolves."""


class ConfigError(PinchflowError, ValueError):
    """Configuration could not be parsed or validated.

    ``field`` names the offending key when known; ``line``/``column`` locate
    parse errors.
    """

    def __init__(self, message: str, field: str | None = None,
                 line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f"line {line}, column {column or 1}: "
        super().__init__(loc + message)
        self.field = field
        self.line = line
        self.column = column


class RunDataError(PinchflowError):
    """A run directory is missing files a command needs."""
