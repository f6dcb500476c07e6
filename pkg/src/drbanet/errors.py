"""Error taxonomy shared by the whole package."""


class DRBANetError(Exception):
    """Base class for all contract violations raised by this package."""


class ConfigurationError(DRBANetError):
    """Invalid structural configuration (channels, groups, resolutions, weights)."""


class ShapeError(DRBANetError):
    """Tensor dimensions incompatible with the requested operation."""


class FormatError(DRBANetError):
    """Malformed file content (DRBT, DRBW, PGM)."""


class NumericError(DRBANetError):
    """Non-finite values or numerically undefined results."""
