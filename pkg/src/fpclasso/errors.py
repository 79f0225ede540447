"""Exception hierarchy shared across the package."""


class FpcError(Exception):
    """Base class for every error raised by fpclasso."""


class UnsupportedFamily(FpcError):
    pass


class NumericalOverflow(FpcError):
    pass


class DegenerateResponse(FpcError):
    pass


class DegenerateColumn(FpcError):
    pass


class DegenerateDenominator(FpcError):
    pass


class OutOfRange(FpcError, ValueError):
    pass


class NonConvergence(FpcError):
    def __init__(self, lam, iterations, message=None):
        self.lam = lam
        self.iterations = iterations
        super().__init__(message or f"no convergence at lambda={lam:.6g} after {iterations} iterations")


class SaturatedFit(FpcError):
    pass


class RegularityViolation(FpcError):
    def __init__(self, message, diagnostic=None):
        self.diagnostic = diagnostic
        super().__init__(message)


class UnsupportedCorrelation(FpcError, ValueError):
    pass


class CampaignFailure(FpcError):
    pass
