"""Error types and diagnostic records shared across the package.

Every error carries a short stable ``code`` (kebab-case) that tests and the
CLI report format key off, plus free-form human text.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Diagnostic:
    """One validation or lint finding."""

    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class IgshapeError(Exception):
    """Base class for package errors; ``code`` is a stable identifier."""

    code = "internal-error"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    @property
    def message(self) -> str:
        return self.args[0] if self.args else ""

    def __str__(self) -> str:
        return f"{self.code}: {super().__str__()}"


class DocumentError(IgshapeError):
    """A JSON document or program text failed to load."""

    code = "bad-document"


class GrammarError(IgshapeError):
    """A grammar violates a well-formedness requirement."""

    code = "bad-grammar"


class UnionUndefinedError(IgshapeError):
    """Componentwise union of two heaps is not defined."""

    code = "undefined-union"


class UndefinedSemanticsError(IgshapeError):
    """A program step has no defined successor on the given heap."""

    code = "undefined-semantics"


class EvaluationUndefinedError(IgshapeError):
    """A pointer or boolean expression has no value on the given heap."""

    code = "undefined-evaluation"


class OutOfFuelError(IgshapeError):
    """Concrete execution exceeded its step budget."""

    code = "out-of-fuel"


class SaturationLimitError(IgshapeError):
    """The emptiness automaton grew past its configured bound."""

    code = "saturation-bound-exceeded"


class MaterializationError(IgshapeError):
    """Materialization could not expose the required selector."""

    code = "unproductive-materialization"


class PreconditionError(IgshapeError):
    """An operation was called outside its stated precondition."""

    code = "precondition-violated"
