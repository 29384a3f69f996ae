"""Exception hierarchy shared across the package."""


class GraphVeilError(Exception):
    """Base class for every error raised by graphveil."""


class InvalidArgumentError(GraphVeilError, ValueError):
    pass


class GraphStateError(GraphVeilError):
    """Raised when mutating a graph that has already been compiled."""


class CycleError(GraphVeilError):
    """Raised by compile when the edge relation is not acyclic.

    Attributes:
        node: id of one node lying on a cycle.
    """

    def __init__(self, node: int, message: str | None = None):
        self.node = node
        super().__init__(message or f"cycle detected through node {node}")


class ArityError(GraphVeilError):
    pass


class FormatError(GraphVeilError):
    pass


class InputError(GraphVeilError):
    pass


class CorruptionError(GraphVeilError):
    pass


class ExhaustedError(GraphVeilError):
    """pick_next was called with every frontier empty."""


class SplitError(GraphVeilError):
    pass


class ShapeError(GraphVeilError):
    pass


class ConfigError(GraphVeilError):
    pass


class ScheduleError(GraphVeilError):
    """A schedule failed validation."""


class DivisionError(GraphVeilError, ZeroDivisionError):
    pass
