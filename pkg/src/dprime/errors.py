"""Exception types raised by the toolkit.

Every error derives from :class:`DPrimeError` so callers (and the CLI) can
catch one base class and still report a specific, machine-readable name.
"""


class DPrimeError(Exception):
    """Base class for all toolkit errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class DimensionMismatch(DPrimeError, ValueError):
    pass


class LengthMismatch(DPrimeError, ValueError):
    pass


class NotUnimodular(DPrimeError, ValueError):
    pass


class RankDeficient(DPrimeError, ValueError):
    pass


class NonPositiveNoise(DPrimeError, ValueError):
    pass


class NotALT(DPrimeError, ValueError):
    pass


class SingularGap(DPrimeError, ValueError):
    pass


class NonIntegral(DPrimeError, ValueError):
    pass


class NotACodeword(DPrimeError, ValueError):
    pass


class Infeasible(DPrimeError, ValueError):
    pass


class GirthUnachievable(DPrimeError, RuntimeError):
    pass


class CollisionError(DPrimeError, ValueError):
    pass


class UnimodularCompletionFailed(DPrimeError, RuntimeError):
    pass


class RangeViolation(DPrimeError, ValueError):
    pass


class NotALatticePoint(DPrimeError, ValueError):
    pass


class NestingViolated(DPrimeError, ValueError):
    pass


class InvalidL(DPrimeError, ValueError):
    pass


class ConfigError(DPrimeError, ValueError):
    """Bad simulation config; ``line`` and ``field`` locate the problem."""

    def __init__(self, message, line=None, field=None):
        super().__init__(message)
        self.line = line
        self.field = field


class FormatError(DPrimeError, ValueError):
    """Malformed matrix or prototype text file."""
