"""Exception hierarchy shared by all simlab modules."""


class SimlabError(Exception):
    """Base class for every error raised by simlab."""


class AlignmentError(SimlabError, ValueError):
    """A direction or axis does not sit on the grid's half-angle lattice."""


class DomainError(SimlabError, ValueError):
    """A point or parameter lies outside the admissible geometric region."""


class SpecError(SimlabError, ValueError):
    """A system specification or scenario document is malformed."""


class BlowUpError(SimlabError, ArithmeticError):
    """Non-finite values appeared during time integration."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class PositivityError(SimlabError, ValueError):
    """A quantity required to be positive is not."""


class StructureError(SimlabError, ValueError):
    """A direction-set mask does not have the shape needed to extract an axis."""


class ConfigError(SimlabError, ValueError):
    """Run parameters are inconsistent (empty schedule, bad dt, ...)."""


class NumericError(SimlabError, ArithmeticError):
    """An iterative numerical routine failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SearchError(SimlabError, ValueError):
    """A parameter search terminated without finding an admissible value."""


class AmplitudeError(SimlabError, ValueError):
    """A branch amplitude is too large to keep both components positive."""
