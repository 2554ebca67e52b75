"""Exception hierarchy shared by every gvlad module.

Each class carries the CLI exit code it maps to: 1 for validation
problems, 2 for I/O and file-format problems, 3 for numerical failures.
"""

from __future__ import annotations


class GvladError(Exception):
    exit_code = 1


class InvalidArgumentError(GvladError, ValueError):
    """An argument is out of range, non-finite or has the wrong shape."""


class EmptyInputError(GvladError, ValueError):
    """An operation that needs at least one item received none."""


class DegenerateInputError(GvladError, ValueError):
    """Input is non-empty but too poor to fit a model (e.g. fewer distinct points than clusters)."""


class ConfigurationError(GvladError, ValueError):
    """A combination of options cannot produce a meaningful result."""


class ValidationError(GvladError, ValueError):
    """A structured input (ground truth, manifest, index entries) violates its invariants."""


class UndefinedQueryError(ValidationError):
    """A query has no relevant items, so its average precision is undefined."""


class NumericalError(GvladError, ArithmeticError):
    exit_code = 3


class FormatError(GvladError, OSError):
    """Base class for malformed files."""

    exit_code = 2


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class NonFiniteValueError(FormatError):
    pass
