"""Exception types shared across the benchmark engine."""


class CambenchError(Exception):
    """Base class for every error raised by this package."""


class InvalidSaliency(CambenchError):
    """Raw saliency contains negative or non-finite values."""


class InvalidDimensions(CambenchError):
    """Requested grid dimensions are out of the supported range."""


class ShapeError(CambenchError):
    """Operands do not share the same (H, W) shape."""


class InvalidK(CambenchError):
    """Coverage curves need at least two quantile levels."""


class EmptyStructure(CambenchError):
    """A structural mask required by the operation has no set pixels."""


class CapacityExceeded(CambenchError):
    """Payload does not fit the requested QR version / ECC level."""


class DoesNotFit(CambenchError):
    """Symbol plus quiet zone does not fit on the canvas."""


class NotEnoughData(CambenchError):
    """Too few samples for the requested statistic."""


class FormatError(CambenchError):
    """Malformed saliency file, mask image, or manifest entry."""


class ScorerProtocolError(CambenchError):
    """A scorer connection violated the cbqr-scorer wire protocol."""
