"""Exception hierarchy shared across the package."""


class ImpactRankError(Exception):
    """Base class for all errors raised by this package."""


class DataFormatError(ImpactRankError):
    """Malformed or inconsistent input data (NDJSON, snapshots, corpora)."""


class CheckpointError(ImpactRankError):
    """Unreadable, corrupt, or incompatible model checkpoint."""
