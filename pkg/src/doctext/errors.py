"""Exception hierarchy shared across the package.

Two failure families matter to callers: bad input (malformed files,
inconsistent bundles, out-of-domain arguments) and numeric divergence
during training.  The CLI maps them to exit codes 2 and 3.
"""


class DoctextError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DoctextError):
    """Invalid argument, malformed file, or inconsistent input bundle."""


class DegenerateQuadError(InputError):
    """Quadrilateral is not strictly convex or yields a singular mapping."""


class FormatError(InputError):
    """Serialized artifact is malformed or truncated."""


class VersionError(FormatError):
    """Serialized artifact declares an unsupported format version."""


class DivergenceError(DoctextError):
    """Training produced a non-finite loss."""
