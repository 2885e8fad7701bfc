"""Exception hierarchy shared across the package.

Data errors (anything wrong with files handed to us) are kept distinct from
programming errors (bad shapes, bad arguments), which raise ValueError.
"""


class RelightError(Exception):
    """Base class for all package-specific errors."""


class DataError(RelightError):
    """A problem with user-supplied data (files, documents, streams)."""


class MissingFileError(DataError):
    """Referenced file does not exist."""


class UnsupportedFormatError(DataError):
    """File exists but is not a format we decode."""


class CorruptDataError(DataError):
    """File is in a supported format but its contents are broken."""


class SchemaError(DataError):
    """A structured document violates the lights-preset schema.

    The message always names the offending field.
    """
