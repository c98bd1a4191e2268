"""Exception types raised by the simulation library."""


class AANError(Exception):
    """Base class for every error raised by this package."""


class InvalidConfigurationError(AANError, ValueError):
    """A parameter combination the algorithms cannot work with."""


class PhaseDomainError(AANError, ValueError):
    """A gait phase outside [0, 2*pi)."""


class SingularBasisError(AANError, ArithmeticError):
    """A basis vector that is identically zero."""


class ContractViolation(AANError, ValueError):
    """A caller broke a documented precondition."""


class ShapeMismatchError(AANError, ValueError):
    """Arrays that should share a grid or batch shape do not."""


class GaitFileFormatError(AANError, ValueError):
    """A baseline gait sample file that cannot be used."""


class ConfigValidationError(AANError, ValueError):
    """A RunConfig that violates one or more invariants.

    The individual messages are kept in ``violations`` so callers can list
    them all instead of stopping at the first one.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__('; '.join(self.violations) or 'invalid configuration')
