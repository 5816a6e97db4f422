"""Error types shared across the package.

All inherit ValueError so callers that do not care about the distinction
can catch one base class.
"""


class FormatError(ValueError):
    """A binary file does not follow its declared on-disk format."""


class DimensionError(ValueError):
    """Array or image dimensions are inconsistent with what an operation needs."""


class DomainError(ValueError):
    """Values fall outside the domain an operation is defined on."""


class SizeError(ValueError):
    """A sample set or parameter is too small (or too large) for an operation."""


class CapacityError(ValueError):
    """A data source cannot supply as many samples as requested."""
