"""Exception hierarchy shared by every module in the package."""


class UrnError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DimensionError(UrnError, ValueError):
    exit_code = 2


class DomainError(UrnError, ValueError):
    exit_code = 2


class SpecError(UrnError, ValueError):
    """An urn specification is malformed (bad probabilities, wrong lengths, ...)."""

    exit_code = 2


class AssumptionError(UrnError):
    """A structural assumption needed by a limit theorem fails."""

    exit_code = 2


class MethodNotApplicable(UrnError):
    """The requested covariance route cannot be used for this urn."""

    exit_code = 2


class NotNormalError(UrnError):
    """The spectral gap condition fails, so no Gaussian limit law is produced."""

    exit_code = 2

    def __init__(self, message, regime=None):
        super().__init__(message)
        self.regime = regime


class SingularLyapunovError(UrnError, ArithmeticError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class ConvergenceError(UrnError, ArithmeticError):
    pass


class CapExceededError(UrnError):
    """A size or resource cap was exceeded; raise the cap explicitly to proceed."""

    exit_code = 3


class VerificationError(UrnError):
    exit_code = 4
