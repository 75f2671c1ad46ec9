"""Exception hierarchy shared across the package."""


class MixednetError(Exception):
    """Base class for all package-specific failures."""


class DimensionError(MixednetError, ValueError):
    """Inputs whose shapes or node counts do not line up."""


class DomainError(MixednetError, ValueError):
    """Inputs outside an operation's stated domain (e.g. too few rows)."""


class NumericError(MixednetError, ArithmeticError):
    """Non-finite inputs or a numerically failed solve (exit code 1 in the CLI)."""


class CohortFormatError(MixednetError, ValueError):
    """Malformed cohort files: bad CSV cells, mismatched headers, missing files."""
