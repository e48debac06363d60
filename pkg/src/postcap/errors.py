"""Exception hierarchy shared by every module of the package."""


class PostcapError(Exception):
    """Base class for all errors raised by postcap."""


class NotHermitian(PostcapError, ValueError):
    pass


class NotPSD(PostcapError, ValueError):
    pass


class NoConvergence(PostcapError, RuntimeError):
    pass


class DimensionMismatch(PostcapError, ValueError):
    pass


class UnknownName(PostcapError, KeyError):
    pass


class ParamOutOfRange(PostcapError, ValueError):
    pass


class EpsOutOfRange(PostcapError, ValueError):
    pass


class NotCPTP(PostcapError, ValueError):
    pass


class SolverFailure(PostcapError, RuntimeError):
    pass


class FeasibilityFailure(PostcapError, RuntimeError):
    pass


class AllInconclusive(PostcapError, ValueError):
    """Raised when a conditional metric has (numerically) zero conclusive probability."""

    def __init__(self, message: str, index=None):
        super().__init__(message)
        self.index = index


class NotNonsignalling(PostcapError, ValueError):
    pass


class AdmissibilityFailure(PostcapError, RuntimeError):
    pass


class InfeasibleRate(PostcapError, ValueError):
    pass


class EmptyScalingInterval(PostcapError, RuntimeError):
    pass


class NumericallyIllConditioned(UserWarning):
    """Warning: a support decision was taken close to the rank tolerance."""
