"""Grayscale images, binary PGM I/O and the line partition used by the encoder.

Pixels stay real-valued in [0, 255] through the whole pipeline; they are only
rounded and clamped to bytes when written to disk.
"""

from dataclasses import dataclass
import re

import numpy as np

from .errors import (
    DimensionError,
    PgmHeaderError,
    PgmMaxvalError,
    PgmTruncatedError,
)

__all__ = [
    "Image",
    "LineSet",
    "load_image",
    "save_image",
    "to_lines",
    "from_lines",
    "pgm_bytes",
    "parse_pgm",
]


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Image:
    """A rows x cols grid of real intensities, stored row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        px = _frozen(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DimensionError(f"image must be a non-empty 2-D grid, got {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("image contains non-finite intensities")
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_flat(cls, values, rows, cols):
        values = np.asarray(values, dtype=np.float64)
        if values.size != rows * cols:
            raise DimensionError(
                f"{values.size} values cannot fill a {rows}x{cols} image"
            )
        return cls(values.reshape(rows, cols))

    @property
    def rows(self):
        return self.pixels.shape[0]

    @property
    def cols(self):
        return self.pixels.shape[1]

    @property
    def shape(self):
        return self.pixels.shape

    def flat(self):
        """Row-major pixel vector (a read-only view)."""
        return self.pixels.reshape(-1)

    def clamp(self):
        return Image(np.clip(self.pixels, 0.0, 255.0))

    def quantized(self):
        """Bytes as they would be stored in a PGM file."""
        return np.clip(np.floor(self.pixels + 0.5), 0, 255).astype(np.uint8)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class LineSet:
    """An image cut into ``num_lines`` consecutive row-major segments of ``line_len`` pixels."""

    lines: np.ndarray
    source_rows: int
    source_cols: int

    def __post_init__(self):
        lines = _frozen(self.lines)
        if lines.ndim != 2:
            raise DimensionError("lines must be a 2-D array (num_lines, line_len)")
        if lines.shape[0] * lines.shape[1] != self.source_rows * self.source_cols:
            raise DimensionError(
                f"{lines.shape[0]} lines of {lines.shape[1]} pixels do not tile a "
                f"{self.source_rows}x{self.source_cols} image"
            )
        object.__setattr__(self, "lines", lines)

    @property
    def line_len(self):
        return self.lines.shape[1]

    @property
    def num_lines(self):
        return self.lines.shape[0]

    def __iter__(self):
        return iter(self.lines)


# -- PGM ---------------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def parse_pgm(data):
    """Decode a binary (P5) 8-bit PGM from ``data``."""
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PgmHeaderError("incomplete PGM header")
        fields.append(m.group(1))
        pos = m.end()
    magic, *nums = fields
    if magic != b"P5":
        raise PgmHeaderError(f"not a binary PGM (magic {magic!r})")
    try:
        cols, rows, maxval = (int(v) for v in nums)
    except ValueError:
        raise PgmHeaderError(f"non-numeric PGM header field in {nums!r}") from None
    if cols < 1 or rows < 1:
        raise PgmHeaderError(f"invalid PGM dimensions {cols}x{rows}")
    if maxval != 255:
        raise PgmMaxvalError(f"maxval {maxval} unsupported, only 255 is accepted")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PgmTruncatedError("PGM header is not followed by pixel data")
    pos += 1
    need = rows * cols
    body = data[pos : pos + need]
    if len(body) < need:
        raise PgmTruncatedError(f"expected {need} pixel bytes, found {len(body)}")
    px = np.frombuffer(body, dtype=np.uint8).reshape(rows, cols)
    return Image(px.astype(np.float64))


def pgm_bytes(image):
    header = f"P5\n{image.cols} {image.rows}\n255\n".encode("ascii")
    return header + image.quantized().tobytes()


def load_image(path):
    """Read a binary PGM file into an :class:`Image`.

    Raises ``FileNotFoundError`` for a missing file and a :class:`PgmError`
    subclass for a malformed header, a maxval other than 255, or truncated
    pixel data.
    """
    with open(path, "rb") as f:
        data = f.read()
    return parse_pgm(data)


def save_image(image, path):
    """Write ``image`` as P5, rounding half-up and clamping to [0, 255]."""
    with open(path, "wb") as f:
        f.write(pgm_bytes(image))


# -- line partition ------------------------------------------------------------


def to_lines(image, line_len=None):
    """Split the row-major pixel stream into consecutive segments of ``line_len``.

    ``line_len`` defaults to the image width, giving one line per row.
    """
    if line_len is None:
        line_len = image.cols
    line_len = int(line_len)
    total = image.rows * image.cols
    if line_len < 2:
        raise DimensionError(f"line length must be at least 2, got {line_len}")
    if total % line_len:
        raise DimensionError(
            f"line length {line_len} does not divide the pixel count {total}"
        )
    return LineSet(image.flat().reshape(-1, line_len), image.rows, image.cols)


def from_lines(lineset):
    """Reassemble an :class:`Image` from its lines; exact inverse of :func:`to_lines`."""
    return Image.from_flat(
        lineset.lines.reshape(-1), lineset.source_rows, lineset.source_cols
    )
