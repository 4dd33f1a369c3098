"""Exception hierarchy.

Everything raised for bad input derives from :class:`FlowMesdError`, which is
itself a :class:`ValueError`, so callers that only care about "bad input"
can catch either.
"""


class FlowMesdError(ValueError):
    """Base class for all input errors raised by flowmesd."""


# -- file formats -----------------------------------------------------------

class FlowFormatError(FlowMesdError):
    """A flow or image file could not be decoded or encoded."""


class BadMagicError(FlowFormatError):
    pass


class TruncatedError(FlowFormatError):
    pass


class NonPositiveDimsError(FlowFormatError):
    pass


class NotPngError(FlowFormatError):
    pass


class WrongBitDepthError(FlowFormatError):
    pass


class WrongChannelCountError(FlowFormatError):
    pass


class UnsupportedFormatError(FlowFormatError):
    pass


class OutOfRangeError(FlowFormatError):
    """A displacement cannot be represented in the target encoding."""


# -- metrics ----------------------------------------------------------------

class MetricError(FlowMesdError):
    pass


class DimensionMismatchError(MetricError):
    pass


class TooSmallError(MetricError):
    pass


class InsufficientSamplesError(MetricError):
    pass


class EmptyRegionError(MetricError):
    pass


class OutOfBoundsError(MetricError):
    pass


class EmptyFieldError(MetricError):
    pass


# -- harness ----------------------------------------------------------------

class ManifestError(FlowMesdError):
    pass


class MissingSecondInputError(FlowMesdError):
    pass
