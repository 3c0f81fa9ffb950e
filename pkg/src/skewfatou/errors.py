"""Exception hierarchy.

Everything numerical derives from :class:`NumericalFailure` so the command
line front end can map it to exit code 2; malformed input derives from
:class:`ValidationError` (exit code 1).
"""


class SkewFatouError(Exception):
    """Base class for all package errors."""


class ValidationError(SkewFatouError, ValueError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, text="", position=None):
        self.text = text
        self.position = position
        if position is not None:
            message = f"{message} at position {position}: {text!r}"
        super().__init__(message)


class NumericalFailure(SkewFatouError, ArithmeticError):
    pass


class NonConvergence(NumericalFailure):
    pass


class Undecided(NumericalFailure):
    def __init__(self, critical_point, reason=""):
        self.critical_point = critical_point
        msg = f"could not classify critical point {critical_point!r}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class NoAttractingMargin(NumericalFailure):
    pass


class DegenerateFit(NumericalFailure):
    pass


class EmptyJuliaSample(NumericalFailure):
    pass


class ResonanceBreakdown(NumericalFailure):
    pass


class BranchCollision(NumericalFailure):
    pass


class OverflowEscape(NumericalFailure):
    pass


class StableManifoldBranch(NumericalFailure):
    pass


class NotResonant(ValidationError):
    pass


class ZeroInput(ValidationError):
    pass


class ClosureMismatch(NumericalFailure):
    pass


class CountMismatch(NumericalFailure):
    pass


class PreconditionFail(ValidationError):
    pass


class HypothesisFail(ValidationError):
    pass
