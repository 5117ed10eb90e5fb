"""Exception hierarchy shared by all modules."""


class DiscAggError(Exception):
    """Base class for every error raised by this package."""


class OverlapError(DiscAggError, ValueError):
    pass


class EmptyInput(DiscAggError, ValueError):
    pass


class InternalInvariantError(DiscAggError, RuntimeError):
    """A geometric invariant broke during a run; the run must be aborted.

    ``events`` carries the tail of the event log (up to 100 entries) for
    post-mortem inspection.
    """

    def __init__(self, message, events=()):
        super().__init__(message)
        self.events = list(events)


class InsufficientData(DiscAggError, ValueError):
    pass


class ArcCollapse(DiscAggError):
    """The shorter fork arm left the hull boundary (left arc is empty)."""


class QuadratureFailure(DiscAggError, ArithmeticError):
    pass


class DomainError(DiscAggError, ValueError):
    pass


class WindowEmpty(DiscAggError, ValueError):
    pass


class InsufficientSurvivors(DiscAggError, ValueError):
    pass


class InsufficientTail(DiscAggError, ValueError):
    pass


class DegeneratePolygon(DiscAggError, ValueError):
    pass


class ConfigurationError(DiscAggError, ValueError):
    pass
