# kslab/errors.py
from __future__ import annotations

EX_OK = 0
EX_INTERNAL = 1
EX_INCONCLUSIVE = 2
EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66


class KslabError(Exception):
    """Base class for every error the laboratory raises on purpose."""

    exit_code = EX_INTERNAL


class InvalidDimension(KslabError, ValueError):
    exit_code = EX_USAGE


class InvalidConfig(KslabError, ValueError):
    exit_code = EX_DATAERR


class InvalidInitialData(KslabError, ValueError):
    exit_code = EX_DATAERR


class MissingInnerMass(KslabError, ValueError):
    pass


class TooCoarse(KslabError, ValueError):
    pass


class SingularDenominator(KslabError, ArithmeticError):
    """The V-equation denominator 1/2 + (5-N)s^2 - Vs^2 vanished."""

    def __init__(self, s: float, V: float, message: str | None = None):
        self.s = float(s)
        self.V = float(V)
        super().__init__(message or f"singular denominator at s={self.s:.6g}, V={self.V:.6g}")


class DivergedError(KslabError, ArithmeticError):
    def __init__(self, s: float, V: float):
        self.s = float(s)
        self.V = float(V)
        super().__init__(f"V diverged at s={self.s:.6g} (V={self.V:.6g})")


class DegenerateTail(KslabError, ValueError):
    """m = 2: the factor (2 - m) vanishes and the relaxation has nothing to relax."""


class NotConverged(KslabError, RuntimeError):
    exit_code = EX_INCONCLUSIVE


class StepFailed(KslabError, RuntimeError):
    pass


class EstimateUnreliable(KslabError, ValueError):
    exit_code = EX_INCONCLUSIVE


class InvalidFrame(KslabError, ValueError):
    pass


class IncompatibleRuns(KslabError, ValueError):
    pass


class NotEnoughData(KslabError, ValueError):
    exit_code = EX_INCONCLUSIVE


class InvalidWindow(KslabError, ValueError):
    exit_code = EX_INCONCLUSIVE


class SchemaError(KslabError, ValueError):
    exit_code = EX_DATAERR

    def __init__(self, message: str, line: int | None = None, path: str = ""):
        self.line = line
        self.path = path
        where = f"line {line}: " if line is not None else ""
        at = f" (at {path})" if path else ""
        super().__init__(f"{where}{message}{at}")


class MissingInput(KslabError, FileNotFoundError):
    exit_code = EX_NOINPUT


class PositivityWarning(UserWarning):
    """More than 0.1% of the nodes had to be clamped back to zero in one step."""


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, KslabError):
        return exc.exit_code
    if isinstance(exc, FileNotFoundError):
        return EX_NOINPUT
    return EX_INTERNAL
