"""Exception taxonomy shared by the whole package.

Every error raised on purpose derives from TelError so callers (and the
command line tool) can catch one base class and map it to an exit code.
"""


class TelError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(TelError):
    """A file on disk is not in the expected format (bad magic, truncated
    payload, unsupported image mode)."""


class ValidationError(TelError):
    """In-memory data violates a documented invariant (label out of range,
    non-finite tensor, shape mismatch)."""


class ArgumentError(TelError):
    """A caller-supplied argument is outside its documented domain."""


class StructuralError(TelError):
    """A graph or tree does not have the required structure (disconnected
    input, wrong edge count, cycle)."""


class CapacityError(TelError):
    """The request exceeds a hard size limit of a dense-only code path."""


class ContractError(TelError):
    """Objects passed together do not belong together (stale workspace,
    mismatched tree)."""
