"""Exception hierarchy shared by every module of the package."""


class IDPError(Exception):
    """Base class for all errors raised by this package."""

    code = "idp-error"


class InvalidCovariate(IDPError, ValueError):
    code = "invalid-covariate"


class DegenerateRate(IDPError, ValueError):
    code = "degenerate-rate"


class AliasingRisk(IDPError, ArithmeticError):
    code = "aliasing-risk"


class StateOverflow(IDPError, ValueError):
    code = "state-overflow"


class NonConvergence(IDPError, RuntimeError):
    code = "non-convergence"


class DegenerateData(IDPError, ValueError):
    code = "degenerate-data"


class SingularInformation(IDPError, ArithmeticError):
    code = "singular-information"


class NonPSD(IDPError, ArithmeticError):
    code = "non-psd"


class InvalidInput(IDPError, ValueError):
    code = "invalid-input"


class InfeasibleDecrement(IDPError, RuntimeError):
    code = "infeasible-decrement"


class InvalidLaw(IDPError, ValueError):
    code = "invalid-law"


class InsufficientData(IDPError, ValueError):
    code = "insufficient-data"


class MalformedRow(IDPError, ValueError):
    code = "malformed-row"

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class PositivityOutOfRange(IDPError, ValueError):
    code = "positivity-out-of-range"


class IcuGap(IDPError, ValueError):
    code = "icu-gap"
