"""Exception hierarchy shared by the library and the command line."""


class StackReduceError(Exception):
    """Base class for every error raised by this package."""


class DataError(StackReduceError, ValueError):
    """Malformed or inconsistent input data."""


class ConfigError(StackReduceError, ValueError):
    """Invalid learner, ensemble or pipeline configuration."""


class ArchiveError(StackReduceError):
    """A model archive could not be read."""


class BadMagicError(ArchiveError):
    pass


class UnsupportedVersionError(ArchiveError):
    pass


class ChecksumError(ArchiveError):
    pass


class TruncatedArchiveError(ArchiveError):
    pass


class MalformedArchiveError(ArchiveError):
    pass
