"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so that the CLI and the
report can emit error lists without string matching.
"""
from __future__ import annotations


class CplifsError(Exception):
    code = "CplifsError"

    def __init__(self, message: str = "", **detail):
        super().__init__(message or self.code)
        self.detail = detail

    def as_dict(self) -> dict:
        out = {"code": self.code, "message": str(self)}
        if self.detail:
            out["detail"] = {k: str(v) for k, v in sorted(self.detail.items())}
        return out


class ValidationError(CplifsError):
    code = "ValidationError"


class ParseError(ValidationError):
    code = "ParseError"


class EmptySystem(ValidationError):
    code = "EmptySystem"


class ZeroSlope(ValidationError):
    code = "ZeroSlope"


class NonContractingSlope(ValidationError):
    code = "NonContractingSlope"


class NonIncreasingBreaks(ValidationError):
    code = "NonIncreasingBreaks"


class SlopeCountMismatch(ValidationError):
    code = "SlopeCountMismatch"


class ConfigError(ValidationError):
    code = "ConfigError"


class DegenerateInterval(CplifsError):
    code = "DegenerateInterval"


class BudgetExceeded(CplifsError):
    code = "BudgetExceeded"


class CrossOverlapPresent(CplifsError):
    code = "CrossOverlapPresent"


class OrbitReturn(CplifsError):
    code = "OrbitReturn"


class NotVerifiable(CplifsError):
    code = "NotVerifiable"


class EmptyTail(CplifsError):
    code = "EmptyTail"
