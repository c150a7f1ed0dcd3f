"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: usage errors exit 2,
DataError exits 3, NumericError exits 4.
"""


class PairmatchError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(PairmatchError):
    """An operand has an incompatible shape; the message names the dimension."""


class ConfigError(PairmatchError):
    """Invalid configuration or variant/parameter mismatch."""


class DataError(PairmatchError):
    """Malformed input file or dataset contract violation."""


class NumericError(PairmatchError):
    """Non-finite value or numerically invalid input where finite math is required."""
