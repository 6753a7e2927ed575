"""
Error hierarchy for the session toolkit.

Every failure surfaced by the library is a SessionError subclass carrying a
stable code (used in JSON reports and by the CLI) plus an optional source
position.
"""

from typing import Any, Dict, Optional, Tuple


class SessionError(Exception):
    """Base class for all domain errors."""

    code = "SessionError"

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
    ):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the JSON error object."""
        payload: Dict[str, Any] = {"code": self.code, "message": self.message}
        if self.line is not None:
            payload["line"] = self.line
            payload["column"] = self.column
        return payload

    def __str__(self) -> str:
        if self.line is not None:
            return f"{self.code} at {self.line}:{self.column}: {self.message}"
        return f"{self.code}: {self.message}"


# Coalgebra errors

class CoalgebraError(SessionError):
    code = "CoalgebraError"


class UnknownState(CoalgebraError):
    code = "UnknownState"


class DanglingTarget(CoalgebraError):
    code = "DanglingTarget"


class ArityMismatch(CoalgebraError):
    code = "ArityMismatch"


class EmptyBranch(CoalgebraError):
    code = "EmptyBranch"


class CoalgebraFormatError(CoalgebraError):
    code = "CoalgebraFormatError"


class UnknownBasicType(CoalgebraError):
    code = "UnknownBasicType"


class BscHasNoDual(CoalgebraError):
    code = "BscHasNoDual"


class DualUndefined(CoalgebraError):
    code = "DualUndefined"


# Syntax errors

class SyntaxFailure(SessionError):
    code = "SyntaxError"


class TypeSyntaxError(SyntaxFailure):
    code = "SyntaxError"


class ProcessSyntaxError(SyntaxFailure):
    code = "SyntaxError"


class DuplicateBranchLabel(SyntaxFailure):
    code = "DuplicateBranchLabel"


class FreeVariable(SyntaxFailure):
    code = "FreeVariable"


class NotContractive(SyntaxFailure):
    code = "NotContractive"


class ConfigError(SyntaxFailure):
    code = "ConfigError"


# Type checking errors

class CheckError(SessionError):
    code = "CheckError"


class UnknownVariable(CheckError):
    code = "UnknownVariable"


class PolarityMismatch(CheckError):
    code = "PolarityMismatch"


class OperationMismatch(CheckError):
    code = "OperationMismatch"


class LabelNotOffered(CheckError):
    code = "LabelNotOffered"


class MissingBranches(CheckError):
    code = "MissingBranches"


class SubtypeFailure(CheckError):
    code = "SubtypeFailure"

    def __init__(
        self,
        message: str,
        failing_pair: Optional[Tuple[str, str]] = None,
        line: Optional[int] = None,
        column: Optional[int] = None,
    ):
        super().__init__(message, line, column)
        self.failing_pair = failing_pair

    def to_dict(self) -> Dict[str, Any]:
        payload = super().to_dict()
        if self.failing_pair is not None:
            payload["failing_pair"] = list(self.failing_pair)
        return payload


class LinearViolation(CheckError):
    code = "LinearViolation"

    def __init__(self, variable: str, state: str):
        super().__init__(f"'{variable}' still has linear type {state}")
        self.variable = variable
        self.state = state


class BranchContextMismatch(CheckError):
    code = "BranchContextMismatch"


class ReplicationContextMismatch(CheckError):
    code = "ReplicationContextMismatch"


class NotParallelizable(CheckError):
    code = "NotParallelizable"


class ParCycle(CheckError):
    code = "ParCycle"


class ResidualLinear(CheckError):
    code = "ResidualLinear"


class MissingAnnotation(CheckError):
    code = "MissingAnnotation"


class SelfPayload(CheckError):
    code = "SelfPayload"


class OracleTooLarge(CheckError):
    code = "OracleTooLarge"


class PreconditionFailed(CheckError):
    code = "PreconditionFailed"
