"""Exception hierarchy shared by every module of the package."""


class PLFError(Exception):
    """Base class for all errors raised by klplf."""


# case_io
class CaseError(PLFError):
    pass


class MissingSection(CaseError):
    pass


class MalformedRow(CaseError):
    pass


class ValidationFailed(CaseError):
    pass


class SchemaViolation(CaseError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


# acpf
class PowerFlowError(PLFError):
    pass


class ZeroImpedanceBranch(PowerFlowError, ValidationFailed):
    """In-service branch with r = x = 0."""


class SingularJacobian(PowerFlowError):
    pass


class Diverged(PowerFlowError):
    """Raised only when a caller asks for strict convergence."""


# uncertainty
class UncertaintyError(PLFError):
    pass


class DegenerateGroup(UncertaintyError):
    pass


class ColumnMissing(UncertaintyError):
    pass


class LengthMismatch(UncertaintyError):
    pass


class TargetResolutionFailed(UncertaintyError):
    pass


# kl
class KLError(PLFError):
    pass


class NotSymmetric(KLError):
    pass


class IndefiniteBeyondTolerance(KLError):
    pass


class XiOutOfRange(KLError):
    pass


# quadrature / sparse grids
class InvalidLevel(PLFError, ValueError):
    pass


class DimensionTooLarge(PLFError, ValueError):
    pass


class ValuesMissing(PLFError):
    pass


# driver / stats
class TooManyDiverged(PLFError):
    pass


class AllNodesDiverged(PLFError):
    pass


class BinMismatch(PLFError, ValueError):
    pass


class IncompatibleRuns(PLFError):
    pass


class ConfigError(PLFError, ValueError):
    pass
