"""Exception hierarchy shared by all leakmatch modules."""


class LeakmatchError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(LeakmatchError, ValueError):
    """A single input value (coordinate, timestamp, record) is out of range."""


class ConfigError(LeakmatchError, ValueError):
    """A configuration is inconsistent or infeasible."""


class CorpusError(LeakmatchError):
    """A corpus could not be built or loaded as a whole."""


class FormatVersionError(CorpusError):
    """A serialized container has an unsupported format version."""


class ShortTraceError(LeakmatchError):
    """A trace holds fewer tuples than the requested leak size.

    Samplers treat this as a skip signal: the caller draws another user.
    """


class InvariantError(LeakmatchError, AssertionError):
    """An internal consistency check failed."""
