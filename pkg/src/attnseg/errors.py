"""Exception taxonomy and process exit codes.

Every failure mode the library can report maps to one of four process exit
codes.  Exceptions carry a stable machine-readable ``code`` string so callers
(and the CLI) can distinguish failure kinds without parsing messages.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3


class AttnsegError(Exception):
    """Base class for all errors raised by this package."""

    #: Process exit code the CLI maps this error to.
    exit_code = EXIT_DATA
    #: Stable identifier for the failure kind.
    code = "error"


class DataError(AttnsegError):
    """Invalid values, shapes, configuration, or semantic violations."""

    exit_code = EXIT_DATA
    code = "data"


class ManifestError(DataError):
    """Manifest missing, unparseable, or violating the documented schema."""

    code = "manifest"


class ShapeMismatchError(DataError):
    """A tensor's actual shape disagrees with its declared shape."""

    code = "shape-mismatch"


class TensorFormatError(DataError):
    """Tensor file exists but is not in the supported serialized format."""

    code = "tensor-format"


class MaskFormatError(DataError):
    """Mask file exists but is not a supported grayscale PGM."""

    code = "mask-format"


class ValidationFailure(DataError):
    """A dump failed semantic validation; carries the full violation list."""

    code = "validation"

    def __init__(self, violations: tuple[str, ...]):
        self.violations = tuple(violations)
        lines = "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(f"dump failed validation with {len(self.violations)} violation(s):\n{lines}")


class IOFailure(AttnsegError):
    """File missing, unreadable, or truncated."""

    exit_code = EXIT_IO
    code = "io"


class MissingFileError(IOFailure):
    """A file named by a manifest or command line does not exist."""

    code = "missing-file"


class TruncatedFileError(IOFailure):
    """A file ended before its declared payload was complete."""

    code = "truncated-file"
