"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for a failed reversibility/assumption condition, 3 for numerical trouble,
1 for bad input.
"""


class QsdkitError(Exception):
    exit_code = 3


# --- input / model definition -------------------------------------------------

class ModelError(QsdkitError):
    exit_code = 1


class ParseError(ModelError):
    """Rate expression does not match the grammar."""

    def __init__(self, message, text="", position=0):
        self.text = text
        self.position = position
        super().__init__(f"{message} at position {position}: {text!r}")


class UnknownIdentifier(ParseError):
    pass


class UnknownModel(ModelError):
    pass


class ParameterConstraintViolated(ModelError):
    pass


class ConfigError(ModelError):
    pass


class DomainError(QsdkitError, ValueError):
    """Rate evaluation left the mathematical domain (log/sqrt of a negative, x/0, ...)."""


# --- model assumptions / analytic conditions ----------------------------------

class AssumptionViolated(QsdkitError):
    exit_code = 2


class NotBirthDeath(AssumptionViolated):
    pass


class NoInteriorEquilibrium(AssumptionViolated):
    pass


class MultipleInteriorEquilibria(AssumptionViolated):
    def __init__(self, message, points=()):
        self.points = list(points)
        super().__init__(message)


class UnstableInterior(AssumptionViolated):
    pass


class ConditionViolated(AssumptionViolated):
    pass


class DegenerateRates(AssumptionViolated):
    pass


class NoPositiveRoot(AssumptionViolated):
    pass


# --- numerics -----------------------------------------------------------------

class NumericalError(QsdkitError):
    pass


class PathOutsideDomain(NumericalError):
    pass


class IntegralDiverged(NumericalError):
    pass


class BoundaryDivergence(NumericalError):
    pass


class DecompositionFailed(NumericalError):
    pass


class SigmaNotPD(NumericalError):
    pass


class TooCloseToBoundary(NumericalError):
    pass


class InvalidState(NumericalError):
    pass


class StateSpaceTooLarge(NumericalError):
    pass


class NotConverged(NumericalError):
    def __init__(self, message, iterations=0):
        self.iterations = iterations
        super().__init__(message)


class TruncationMassTooLarge(NumericalError):
    pass
