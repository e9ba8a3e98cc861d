"""Exception types raised across the package."""


class HarqAoiError(Exception):
    pass


class DomainError(HarqAoiError, ValueError):
    """Blocklength below the message length k."""


class ExtrapolationError(HarqAoiError, ValueError):
    """Blocklength outside the range covered by a tabulated ACK model."""


class TableError(HarqAoiError, ValueError):
    """Malformed or non-monotone ACK table."""


class DistributionError(HarqAoiError, ValueError):
    pass


class InfeasibleError(HarqAoiError, RuntimeError):
    """Every SDO solution sequence was rejected."""


class BranchExplosionError(HarqAoiError, RuntimeError):
    pass


class NonBracketingError(HarqAoiError, RuntimeError):
    pass


class CapError(HarqAoiError, ValueError):
    """IIR blocklength cap too small for the residual failure probability."""
