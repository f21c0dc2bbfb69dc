"""Error taxonomy shared across the toolkit.

The CLI maps these onto exit codes (see cli.main): input errors exit 1,
backend errors 2, invariant violations 3.
"""


class WorkmineError(Exception):
    """Base class for all toolkit errors."""


class InputError(WorkmineError):
    """Malformed or inconsistent user-supplied data: files, flags, configs."""


class BackendError(WorkmineError):
    """An annotator backend failed (network, credentials, retry exhaustion)."""


class AnnotatorParseError(BackendError):
    """The backend answered, but the transcript had no usable verdict or text."""


class InvariantViolation(WorkmineError):
    """An internal structural guarantee was broken. Always a bug, never data."""
