"""Exception types raised across the package."""


class BakerNewtonError(Exception):
    pass


class DomainError(BakerNewtonError, ValueError):
    pass


class NoAdmissibleP(BakerNewtonError):
    pass


class NoNegativeWindow(BakerNewtonError):
    pass


class NoCrossing(BakerNewtonError):
    pass


class TruncationInsufficient(BakerNewtonError):
    pass


class PreconditionError(BakerNewtonError, ValueError):
    pass


class BoundOnlyContext(BakerNewtonError):
    """A value was required but only an upper bound on |Pi| is available."""


class PoleError(BakerNewtonError, ZeroDivisionError):
    pass


class ScanInconclusive(BakerNewtonError):
    pass


class QuadratureStalled(BakerNewtonError):
    pass


class NoAdmissibleN(BakerNewtonError):
    def __init__(self, msg, ratios=None):
        super().__init__(msg)
        self.ratios = ratios or {}


class FitFailed(BakerNewtonError):
    pass


class CriticalPoint(BakerNewtonError, ZeroDivisionError):
    pass


class NaNGuard(BakerNewtonError, FloatingPointError):
    pass


class ConfigError(BakerNewtonError):
    pass
