"""The LCS1 container: what a sensor node transmits to the decoder.

Layout (all integers little-endian)::

    offset  size  field
         0     4  magic       b"LCS1"
         4     2  version     u16, currently 1
         6     4  rows        u32
        10     4  cols        u32
        14     4  line_len    u32
        18     4  m_per_line  u32
        22     8  seed        u64
        30     2  prng_id     u16
        32     -  payload     num_lines * m_per_line float64 (<f8), line-major

The sampling operator itself is never stored; the decoder regenerates it from
``(seed, prng_id, m_per_line, line_len)``.
"""

import struct

import numpy as np

from .errors import (
    BadMagicError,
    HeaderInvariantError,
    LengthMismatchError,
    NonFiniteError,
    UnsupportedVersionError,
)
from .sampling import PRNG_ID, EncodedSample

__all__ = ["MAGIC", "VERSION", "HEADER", "serialize", "deserialize", "read_header", "save", "load"]

MAGIC = b"LCS1"
VERSION = 1
HEADER = struct.Struct("<4sHIIIIQH")
assert HEADER.size == 32

_F8 = np.dtype("<f8")


def serialize(sample):
    """Encode ``sample`` as LCS1 bytes."""
    y = sample.measurements
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("cannot serialise non-finite measurements")
    head = HEADER.pack(
        MAGIC,
        VERSION,
        sample.source_rows,
        sample.source_cols,
        sample.line_len,
        sample.m_per_line,
        sample.seed,
        sample.prng_id,
    )
    return head + y.astype(_F8, copy=False).tobytes()


def read_header(data):
    """Parse and validate the fixed header; returns a dict of its fields."""
    if len(data) < HEADER.size:
        if not bytes(data[:4]) == MAGIC[: len(data[:4])]:
            raise BadMagicError("not an LCS1 stream")
        raise LengthMismatchError(f"stream of {len(data)} bytes is shorter than the header")
    magic, version, rows, cols, line_len, m, seed, prng_id = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"LCS1 version {version} not supported")
    if prng_id != PRNG_ID:
        raise UnsupportedVersionError(f"unknown PRNG id {prng_id}")
    if rows < 1 or cols < 1:
        raise HeaderInvariantError(f"image dimensions {rows}x{cols} are empty")
    if line_len < 2 or (rows * cols) % line_len:
        raise HeaderInvariantError(f"line length {line_len} does not tile {rows}x{cols}")
    if not 1 <= m <= line_len:
        raise HeaderInvariantError(f"m_per_line {m} outside [1, {line_len}]")
    return dict(
        rows=rows, cols=cols, line_len=line_len, m_per_line=m, seed=seed, prng_id=prng_id
    )


def deserialize(data):
    """Decode LCS1 bytes back to an :class:`EncodedSample`."""
    h = read_header(data)
    num_lines = h["rows"] * h["cols"] // h["line_len"]
    expected = HEADER.size + 8 * num_lines * h["m_per_line"]
    if len(data) != expected:
        raise LengthMismatchError(
            f"stream has {len(data)} bytes, header implies {expected}"
        )
    y = np.frombuffer(data, dtype=_F8, offset=HEADER.size).reshape(num_lines, h["m_per_line"])
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("payload contains non-finite values")
    return EncodedSample(
        h["rows"],
        h["cols"],
        h["line_len"],
        h["m_per_line"],
        h["seed"],
        y.astype(np.float64),
        h["prng_id"],
    )


def save(sample, path):
    data = serialize(sample)
    with open(path, "wb") as f:
        f.write(data)
    return len(data)


def load(path):
    with open(path, "rb") as f:
        return deserialize(f.read())
