"""Exception hierarchy.

Validation problems (bad input files, broken references) derive from
:class:`ModelError`; problems found while analysing a valid model derive
from :class:`AnalysisError`. The CLI maps the two families onto exit codes
2 and 1.
"""

from __future__ import annotations


class DeptreeError(Exception):
    """Base class for every error raised by this package."""


class ModelError(DeptreeError, ValueError):
    """Invalid model content.

    ``location`` is a JSON-pointer-like string (``/fault_trees/G0/gates/G1``)
    when the offending element is known.
    """

    def __init__(self, message: str, location: str | None = None):
        super().__init__(message)
        self.message = message
        self.location = location

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": self.message, "location": self.location}

    def __str__(self) -> str:
        if self.location:
            return f"{self.location}: {self.message}"
        return self.message


class ModelSyntaxError(ModelError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update(line=self.line, column=self.column)
        return out


class CycleError(ModelError):
    def __init__(self, cycle: list[str], location: str | None = None):
        super().__init__("cyclic gate graph: " + " -> ".join(cycle), location)
        self.cycle = cycle


class GroupStraddleError(ModelError):
    """A dependency group has members on both sides of a sub-tree boundary."""


class ValidationErrors(ModelError):
    """Several validation failures collected in one pass."""

    def __init__(self, errors: list[ModelError]):
        self.errors = list(errors)
        super().__init__(f"{len(self.errors)} validation error(s): " + "; ".join(str(e) for e in self.errors))

    def to_dict(self) -> dict:
        return {"error": "ValidationErrors", "errors": [e.to_dict() for e in self.errors]}


class AnalysisError(DeptreeError):
    """Failure while quantifying a valid model."""


class NullEventError(AnalysisError, ZeroDivisionError):
    """Conditioning on an event of probability zero."""


class MissingDataError(AnalysisError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "missing data"


class OrderingError(AnalysisError, ValueError):
    pass


class PathLimitError(AnalysisError):
    pass


class UnsupportedError(AnalysisError):
    pass


class SolverError(AnalysisError):
    """Markov chain cannot be solved for a steady state."""


class LivelockError(AnalysisError):
    """Immediate transitions kept firing at a single instant."""
