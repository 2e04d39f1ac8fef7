"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class QallocError(Exception):
    """Base class. ``pos`` is an optional (line, col) pair, 1-based."""

    def __init__(self, message: str, pos: tuple[int, int] | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.pos = pos

    def render(self, filename: str = "<input>") -> str:
        line, col = self.pos if self.pos else (1, 1)
        return f"{filename}:{line}:{col}: error[{type(self).__name__}]: {self.message}"


# lang-core
class CaptureError(QallocError):
    pass


# frontend
class ParseError(QallocError):
    def __init__(
        self,
        message: str,
        pos: tuple[int, int] | None = None,
        expected: tuple[str, ...] = (),
    ) -> None:
        if expected:
            message = f"{message} (expected {', '.join(expected)})"
        super().__init__(message, pos)
        self.expected = expected


# both checkers
class TypeCheckError(QallocError):
    pass


class UnusedVariable(TypeCheckError):
    pass


class UnknownVariable(TypeCheckError):
    pass


class DuplicateVariable(TypeCheckError):
    pass


class ArityMismatch(TypeCheckError):
    pass


class BranchMismatch(TypeCheckError):
    pass


class UnknownFunction(TypeCheckError):
    pass


# source checker
class SourceTypeError(TypeCheckError):
    pass


class BudgetExceeded(SourceTypeError):
    pass


class SignatureInferenceFailure(SourceTypeError):
    pass


# target checker
class TargetTypeError(TypeCheckError):
    pass


class ConnectivityViolation(TargetTypeError):
    pass


class InstantiationConflict(TargetTypeError):
    pass


class ConstraintUnsatisfied(TargetTypeError):
    pass


class NonInjectiveInstantiation(TargetTypeError):
    pass


class IllFormedContext(TargetTypeError):
    pass


# graphs
class GraphError(QallocError):
    pass


class DisconnectedInput(GraphError):
    pass


class DeviceTooSmall(GraphError):
    pass


class NoEmbedding(GraphError):
    pass


class InvalidMap(GraphError):
    pass


class TooLarge(GraphError):
    pass


# allocator
class AllocError(QallocError):
    pass


class MissingOccupant(AllocError):
    pass


class InternalPostconditionViolation(AllocError):
    pass


# simulator
class SimError(QallocError):
    pass


class StuckNoFreeQubit(SimError):
    pass


class StuckIllFormed(SimError):
    pass


class ConnectivityStuck(SimError):
    pass


class FuelExhausted(SimError):
    def __init__(self, message: str, traces: list | None = None) -> None:
        super().__init__(message)
        self.traces = traces or []


class TooLargeWithoutHint(SimError):
    pass


class BranchStructureMismatch(SimError):
    pass
