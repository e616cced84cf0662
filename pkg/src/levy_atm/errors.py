"""Exception hierarchy shared by every module of the package."""


class LevyAtmError(Exception):
    """Base class for all package errors."""


# numerics
class QuadratureFailure(LevyAtmError):
    pass


class DivergentIntegral(QuadratureFailure):
    pass


class DivergenceDetected(DivergentIntegral):
    pass


class BracketFailure(LevyAtmError):
    pass


class DomainError(LevyAtmError, ValueError):
    pass


class StripViolation(DomainError):
    pass


class AlphaDomain(DomainError):
    pass


class GridError(DomainError):
    pass


class DegenerateRange(DomainError):
    pass


class PriceOutOfRange(DomainError):
    pass


# models
class MomentFailure(LevyAtmError):
    pass


class MeasureTagError(LevyAtmError):
    pass


class NonMonotoneTail(LevyAtmError):
    pass


class TailDegenerate(LevyAtmError):
    pass


class TailVanished(LevyAtmError):
    pass


# simulation / verification
class SimulationBudgetExceeded(LevyAtmError):
    pass


class PreconditionViolation(LevyAtmError):
    pass


class AssumptionViolation(LevyAtmError):
    def __init__(self, assumption: str, detail: str = ""):
        self.assumption = assumption
        super().__init__(f"assumption {assumption} violated" + (f": {detail}" if detail else ""))


class ConfigError(LevyAtmError, ValueError):
    pass


class ConfigHashMismatch(LevyAtmError):
    pass
