"""Exception hierarchy shared by every stage of the toolchain."""

from __future__ import annotations


class ImageCLError(Exception):
    """Base class; carries an optional source position for diagnostics."""

    severity = "error"

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def diagnostic(self, filename: str = "<input>") -> str:
        if self.line is None:
            return f"{filename}: {self.severity}: {self.message}"
        return f"{filename}:{self.line}:{self.col}: {self.severity}: {self.message}"


class LexError(ImageCLError):
    pass


class ParseError(ImageCLError):
    def __init__(self, message, line=None, col=None, expected=()):
        super().__init__(message, line, col)
        self.expected = tuple(expected)


class RestrictionError(ImageCLError):
    """A construct that is valid C but outside the ImageCL subset."""


class KernelTypeError(ImageCLError):
    pass


class MissingGridError(ImageCLError):
    pass


class InternalInvariantError(ImageCLError):
    """A transformation produced output violating its own post-conditions."""


class TileTooLargeError(ImageCLError):
    pass


class EmitError(ImageCLError):
    pass


class TrapError(ImageCLError):
    """Out-of-bounds access to a raw array or local tile during interpretation."""

    def __init__(self, message, work_item=None):
        super().__init__(message)
        self.work_item = work_item


class DivergentBarrierError(ImageCLError):
    def __init__(self, message, work_item=None):
        super().__init__(message)
        self.work_item = work_item


class MeasureError(ImageCLError):
    def __init__(self, message, kind: str):
        super().__init__(message)
        self.kind = kind


class EmptySpaceError(ImageCLError):
    pass


class InsufficientDataError(ImageCLError):
    pass


class NoValidMeasurementError(ImageCLError):
    pass


class BufferFormatError(ImageCLError):
    pass
