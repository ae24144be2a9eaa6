"""
Exceptions raised by the constructions.

Every exception carries a machine-readable ``code`` (used in run reports)
and an optional ``witness``: a JSON-serialisable object that pinpoints
what went wrong (a colliding pair, an uncovered point, ...).
Verifiers never raise these; they return reports instead.
"""
from typing import Any

__all__ = [
    'RokhlinError',
    'ParameterError',
    'PreconditionError',
    'SmallnessBudgetError',
    'ColoringError',
    'EnumerationBudgetError',
    'VerificationError',
    'BudgetExceededError',
]


class RokhlinError(Exception):
    """Base class for all errors raised by `rokhlindim`"""

    code: str = 'error'

    def __init__(self, message: str, *, witness: Any = None) -> None:
        super().__init__(message)
        self.message = message
        self.witness = witness
        self.context: dict[str, Any] = {}

    def to_json(self) -> dict:
        obj = {'code': self.code, 'message': self.message}
        if self.witness is not None:
            obj['witness'] = self.witness
        if self.context:
            obj['context'] = dict(self.context)
        return obj


class ParameterError(RokhlinError, ValueError):
    code = 'parameter'


class PreconditionError(RokhlinError):
    code = 'precondition'


class SmallnessBudgetError(RokhlinError):
    code = 'smallness-budget'


class ColoringError(RokhlinError):
    code = 'coloring'


class EnumerationBudgetError(RokhlinError):
    code = 'enumeration-budget'


class VerificationError(RokhlinError):
    code = 'verification'


class BudgetExceededError(RokhlinError):
    code = 'budget-exceeded'
