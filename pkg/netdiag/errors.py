from __future__ import annotations

import typing as t


class NetdiagError(Exception):
    pass


class InvalidModelError(NetdiagError, ValueError):
    """A network model, failure or dynamics violates its construction rules"""


class DimensionMismatchError(InvalidModelError):
    pass


class NoSensorsError(InvalidModelError):
    pass


class DegenerateFailureError(InvalidModelError):
    """A failure would remove no edge at all"""


class IdenticalScenariosError(InvalidModelError):
    """
    Two scenarios remove exactly the same edges. Such a pair always produces
    the same outputs, so a failure set containing it is never isolable.
    """

    def __init__(self, message: str, pair: tuple[int, int] | None = None) -> None:
        super().__init__(message)
        self.pair = pair


class DescriptionError(InvalidModelError):
    """A network description file could not be read or is malformed"""


class SolveError(NetdiagError, ArithmeticError):
    pass


class PreconditionError(NetdiagError, ValueError):
    def __init__(self, message: str, pair: tuple[int, int] | None = None) -> None:
        super().__init__(message)
        self.pair = pair


class InfeasiblePlacementError(NetdiagError):
    """Some target of a hitting-set instance is empty"""

    def __init__(self, message: str, origin: t.Any = None) -> None:
        super().__init__(message)
        self.origin = origin


class SearchLimitError(NetdiagError, ValueError):
    pass


class TrajectoryMismatchError(NetdiagError, ValueError):
    pass


class ExportError(NetdiagError, OSError):
    pass
