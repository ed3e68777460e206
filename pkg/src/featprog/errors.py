"""Exception hierarchy.

Each class carries the CLI exit code it maps to, so the command layer can
translate failures without a lookup table.
"""

from __future__ import annotations


class FeatprogError(Exception):
    exit_code = 1


# -- data errors (exit 3) ----------------------------------------------------

class DataError(FeatprogError):
    exit_code = 3


class ShapeError(DataError):
    pass


class IndexOrderError(DataError):
    pass


class EmptyOutputError(DataError):
    pass


class EmptyContentError(DataError):
    """An operator would emit a series with no defined samples."""


class InsufficientDataError(DataError):
    pass


class SolverError(DataError):
    pass


class UndefinedMetricError(DataError):
    pass


class ProtocolError(DataError):
    pass


# -- usage / program errors (exit 2) -----------------------------------------

class ParameterError(FeatprogError):
    exit_code = 2


class ProgramError(FeatprogError):
    """Base for anything wrong with a feature program.

    Carries an optional location: a path inside the program document
    (``where``), a 1-based line/column, and/or a 0-based byte offset into an
    expression string.
    """

    exit_code = 2

    def __init__(self, message: str, offset: int | None = None,
                 line: int | None = None, column: int | None = None,
                 where: str | None = None):
        self.message = message
        self.offset = offset
        self.line = line
        self.column = column
        self.where = where
        super().__init__(self._render())

    def _render(self) -> str:
        loc = []
        if self.where:
            loc.append(self.where)
        if self.line is not None:
            loc.append(f"line {self.line}")
        if self.column is not None:
            loc.append(f"column {self.column}")
        if self.offset is not None:
            loc.append(f"offset {self.offset}")
        return f"{self.message} ({', '.join(loc)})" if loc else self.message

    def located(self, **kw) -> "ProgramError":
        """Copy of this error with extra location fields filled in."""
        fields = dict(offset=self.offset, line=self.line, column=self.column, where=self.where)
        fields.update({k: v for k, v in kw.items() if v is not None})
        return type(self)(self.message, **fields)


class ProgramSyntaxError(ProgramError):
    pass


class InvalidParameterError(ProgramError):
    pass


class UnknownFunctionError(ProgramError):
    pass


class ArityError(ProgramError):
    pass


class OrderMismatchError(ProgramError):
    pass


class DuplicateNameError(ProgramError):
    pass


class ResolutionError(ProgramError):
    pass


# -- simulator ---------------------------------------------------------------

class CapacityError(FeatprogError):
    """Exhaustive enumeration requested beyond its configured bound."""

    exit_code = 4
