"""Exception hierarchy shared by all modules."""


class GausslikeError(Exception):
    """Base class for library errors."""


class DomainError(GausslikeError, ValueError):
    """Argument outside the domain where the operation is defined."""


class ConvergenceError(GausslikeError, RuntimeError):
    """An iterative method failed to reach its tolerance."""


class IntegrabilityError(GausslikeError, ValueError):
    """A weight integral diverges or could not be evaluated to a finite value."""


class LemmaViolationError(GausslikeError):
    """A transport map has derivative below one beyond the allowed slack."""


class RegionError(GausslikeError, ValueError):
    """A test region is malformed (overlapping pieces, steep graph, ...)."""


class CoefficientError(GausslikeError, ValueError):
    """An elliptic coefficient field violates the ellipticity sandwich."""


class PreconditionError(GausslikeError, ValueError):
    """Input data do not satisfy an operation's stated precondition."""


class ConfigError(GausslikeError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
