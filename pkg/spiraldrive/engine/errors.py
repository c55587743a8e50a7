"""
Error hierarchy shared by every engine.

Each class carries the process exit code the CLI reports for it:
1 validation, 2 input parse, 3 numerical failure.
"""
from typing import Optional, Sequence, Tuple


class SpiralDriveError(Exception):
    exit_code = 1


class ContractError(SpiralDriveError):
    """A caller broke an operation's precondition (bad state, mismatched systems)."""
    exit_code = 1


class DomainError(SpiralDriveError):
    """A physical parameter is outside the range the model is defined for."""
    exit_code = 1


class SingularityError(DomainError):
    """Field evaluated on (or too close to) a conductor filament."""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.point = tuple(point) if point is not None else None


class ParseError(SpiralDriveError):
    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        where = ""
        if path:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path


class NumericalError(SpiralDriveError):
    exit_code = 3


class ConvergenceError(NumericalError):
    """Step refinement ran out before successive fidelities agreed."""

    def __init__(self, message: str, last_fidelities: Tuple[float, float]):
        super().__init__(f"{message} (last fidelities {last_fidelities[0]!r}, {last_fidelities[1]!r})")
        self.last_fidelities = last_fidelities


class FitError(NumericalError):
    pass


class BracketError(NumericalError):
    def __init__(self, message: str, bracket: Tuple[float, float]):
        super().__init__(f"{message} (last bracket [{bracket[0]:.6g}, {bracket[1]:.6g}])")
        self.bracket = bracket


class LandscapeError(NumericalError):
    """A landscape cell failed; carries the (offset, phase) indices and values."""

    def __init__(self, message: str, cell: Tuple[int, int], coordinates: Tuple[float, float]):
        super().__init__(
            f"{message} at cell (offset #{cell[0]}, phase #{cell[1]}) = "
            f"(a={coordinates[0]:.6g}, phi={coordinates[1]:.6g})"
        )
        self.cell = cell
        self.coordinates = coordinates
