"""Exception types shared across the package."""


class EigenrlError(Exception):
    """Base class for every error raised by this package."""


class NotHermitian(EigenrlError):
    """Matrix is not Hermitian within tolerance."""


class NoConvergence(EigenrlError):
    """Iterative diagonalizer exhausted its sweep budget."""


class BadIndices(EigenrlError):
    """Subspace indices are equal, unordered, or out of range."""


class DimMismatch(EigenrlError):
    """Operands have incompatible dimensions."""


class OutOfRange(EigenrlError):
    """Integer argument lies outside its permitted range."""


class BadDim(EigenrlError):
    """Hilbert-space dimension is unsupported."""


class StageOverflow(EigenrlError):
    """Attempt to advance past the final learning stage."""


class ModeMismatch(EigenrlError):
    """Fidelity aggregation mode is incompatible with the supplied data."""


class AngleDomain(EigenrlError):
    """Closed-form angle update produced an out-of-domain intermediate."""


class ConfigError(EigenrlError):
    """Configuration file or value is malformed."""
