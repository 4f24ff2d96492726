"""Exception hierarchy shared by the codec, solver and command-line tool."""


class LcsError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(LcsError, ValueError):
    """Array shapes or image dimensions are inconsistent."""


class RateError(LcsError, ValueError):
    """Sampling rate outside (0, 1] or yielding zero measurements."""


class CapacityError(LcsError, MemoryError):
    """A dense operator would exceed the configured entry cap."""

    def __init__(self, entries, cap):
        self.entries = entries
        self.cap = cap
        super().__init__(
            f"dense operator needs {entries} entries, above the cap of {cap}"
        )


class PgmError(LcsError, ValueError):
    """Base class for unreadable PGM input."""


class PgmHeaderError(PgmError):
    pass


class PgmMaxvalError(PgmError):
    pass


class PgmTruncatedError(PgmError):
    pass


class FormatError(LcsError, ValueError):
    """Base class for malformed LCS1 streams."""


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class HeaderInvariantError(FormatError):
    pass


class LengthMismatchError(FormatError):
    pass


class NonFiniteError(FormatError):
    """Measurement payload contains NaN or infinity."""


class DivergenceError(LcsError, ArithmeticError):
    """The solver produced a non-finite iterate."""

    def __init__(self, iteration, what="iterate"):
        self.iteration = iteration
        super().__init__(f"non-finite {what} at outer iteration {iteration}")


class ReportMismatchError(LcsError, ValueError):
    """Two rate-distortion reports cannot be compared."""
