"""Error taxonomy shared across the package.

Every domain failure raises a subclass of CgmatchError carrying a stable
``code`` string so the service layer can map errors onto machine-readable
responses without string matching.
"""

from __future__ import annotations


class CgmatchError(Exception):
    """Base class for all domain errors."""

    code = "error"


class NonFinite(CgmatchError):
    """A value that must be finite is NaN or infinite."""

    code = "non_finite"


class EmptyInput(CgmatchError):
    code = "empty_input"


class TooFewTokens(CgmatchError):
    """An operation needs at least two tokens."""

    code = "too_few_tokens"


class DimensionMismatch(CgmatchError):
    code = "dimension_mismatch"


class IndexOutOfRange(CgmatchError):
    code = "index_out_of_range"


class ReductionTooLarge(CgmatchError):
    """Requested r exceeds what the token count can support."""

    code = "reduction_too_large"


class MissingImportance(CgmatchError):
    """An importance-weighted mode was requested without importance values."""

    code = "missing_importance"


class MissingReference(CgmatchError):
    """Informative initialization requires a reference token."""

    code = "missing_reference"


class LengthMismatch(CgmatchError):
    code = "length_mismatch"


class InvalidSchedule(CgmatchError):
    code = "invalid_schedule"


class InstanceTooLarge(CgmatchError):
    """The exhaustive oracle refuses instances beyond its guard rails."""

    code = "instance_too_large"


class UnsupportedOption(CgmatchError):
    """A request combines options that do not work together."""

    code = "unsupported_option"


class FileFormatError(CgmatchError):
    """Base class for embedding-file parse failures."""

    code = "file_format"


class BadMagic(FileFormatError):
    code = "bad_magic"


class UnsupportedVersion(FileFormatError):
    code = "unsupported_version"


class TruncatedPayload(FileFormatError):
    code = "truncated_payload"
