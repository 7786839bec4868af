"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 2, data errors
exit 3, internal-consistency errors exit 4.
"""


class OtranksError(Exception):
    """Base class for all package errors."""


class UsageError(OtranksError):
    """Bad parameters or an unsupported combination of options."""


class DataError(OtranksError):
    """Malformed, non-finite or otherwise unusable input data."""


class ShapeError(DataError):
    """Mismatched counts or dimensions between related inputs."""


class ValidationError(DataError):
    """A supplied object violates a documented invariant."""


class MetadataError(DataError):
    """A cached null table does not match the requested configuration."""


class ParseError(DataError):
    """A file could not be parsed."""


class SizeGuardError(UsageError):
    """An exhaustive routine was asked to run beyond its size cap."""


class InternalConsistencyError(OtranksError):
    """A provably-impossible value was computed; indicates a bug."""
