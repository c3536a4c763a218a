"""Exception hierarchy shared across the package."""


class MiniGibbsError(Exception):
    """Base class for all package errors."""


class InvalidGraphError(MiniGibbsError, ValueError):
    """A factor graph definition is malformed."""


class InvalidStateError(MiniGibbsError, ValueError):
    """A state does not fit the graph (wrong length or value out of range)."""


class InvalidParameterError(MiniGibbsError, ValueError):
    """A numeric parameter is outside its allowed domain."""


class StateSpaceTooLargeError(MiniGibbsError):
    """Brute-force enumeration was requested above the configured cap."""


class NotReversibleError(MiniGibbsError):
    """Detailed balance fails beyond the requested tolerance."""


class PreconditionError(MiniGibbsError):
    """A gap-bound precondition does not hold for the given inputs."""


class ObserverError(MiniGibbsError):
    """An observer callback raised while a chain was running."""
