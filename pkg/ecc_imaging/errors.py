"""
Exception types raised by the imaging simulator.
"""

from typing import Optional


class EccImagingError(Exception):
    """Base class for simulator errors."""


class ConfigurationError(EccImagingError, ValueError):
    """Invalid parameters or configuration (bad pattern name, tiling, lengths)."""


class ImageParseError(EccImagingError, ValueError):
    """Malformed netpbm payload."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class CalibrationError(EccImagingError, ValueError):
    """SNR calibration is undefined for the given signal."""


class ChannelMisuseError(EccImagingError, ValueError):
    """Soft remapping requested on a noiseless channel."""


class DecodeInputError(EccImagingError, ValueError):
    """Decoder input inconsistent with the encoding graph."""


class StageError(EccImagingError):
    """A pipeline stage failed; wraps the original exception."""

    def __init__(self, stage: str, cause: Optional[BaseException] = None):
        detail = f"{type(cause).__name__}: {cause}" if cause is not None else "failed"
        super().__init__(f"stage '{stage}' failed: {detail}")
        self.stage = stage
        self.cause = cause
