"""Seeded orthonormal Gaussian measurement operators and the two encoders.

The line encoder applies one small ``M x L`` operator to every line of the
image; the whole-image encoder (the conventional baseline) applies a single
``M x (rows*cols)`` operator to the vectorised image.  Operators are never
stored or transmitted: ``(seed, m, n, prng_id)`` regenerates them exactly.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import CapacityError, DimensionError, NonFiniteError, RateError
from .imaging import Image, to_lines

__all__ = [
    "PRNG_ID",
    "DEFAULT_CAPACITY",
    "SamplingMatrix",
    "EncodedSample",
    "measurement_count",
    "gaussian_draws",
    "matrix_from_seed",
    "generate_matrix",
    "iter_encode",
    "encode_lines",
    "encode_image",
    "encode_whole",
    "coherence",
]

#: Identifier written to the LCS1 header.  1 = MT19937 seeded through
#: ``numpy.random.SeedSequence(seed)``, Gaussians from the legacy
#: ``RandomState.standard_normal`` path (frozen by NumPy's stream policy).
PRNG_ID = 1

#: Largest dense operator (in entries) the whole-image encoder will build.
#: 2**24 float64 entries is 128 MiB; a 64x64 image fits even at rate 1.
DEFAULT_CAPACITY = 1 << 24

SEED_MASK = (1 << 64) - 1


def measurement_count(rate, n):
    """Number of rows ``round(rate * n)``, rounding halves up."""
    rate = float(rate)
    if not (0.0 < rate <= 1.0) or math.isnan(rate):
        raise RateError(f"sampling rate must lie in (0, 1], got {rate}")
    m = math.floor(rate * n + 0.5)
    if m < 1:
        raise RateError(f"rate {rate} gives zero measurements for length {n}")
    return m


def gaussian_draws(m, n, seed, prng_id=PRNG_ID):
    """The raw i.i.d. standard normal ``(m, n)`` block for ``seed``, row-major."""
    if prng_id != PRNG_ID:
        raise ValueError(f"unknown PRNG id {prng_id}")
    bitgen = np.random.MT19937(np.random.SeedSequence(int(seed) & SEED_MASK))
    return np.random.RandomState(bitgen).standard_normal((m, n))


@dataclass(frozen=True, eq=False)
class SamplingMatrix:
    """An ``m x n`` operator with orthonormal rows."""

    entries: np.ndarray
    seed: int
    prng_id: int = PRNG_ID

    @property
    def m(self):
        return self.entries.shape[0]

    @property
    def n(self):
        return self.entries.shape[1]

    @property
    def rate(self):
        return self.m / self.n

    def __matmul__(self, other):
        return self.entries @ other


def matrix_from_seed(m, n, seed, prng_id=PRNG_ID):
    """Regenerate the operator from header fields.

    Rows are orthonormalised with a Householder QR of the transposed draw,
    with column signs fixed so that R has a positive diagonal; this equals
    classical Gram-Schmidt on the rows in exact arithmetic.
    """
    m, n = int(m), int(n)
    if n < 2:
        raise DimensionError(f"signal length must be at least 2, got {n}")
    if not 1 <= m <= n:
        raise DimensionError(f"need 1 <= m <= n, got m={m}, n={n}")
    g = gaussian_draws(m, n, seed, prng_id)
    q, r = np.linalg.qr(g.T)
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    phi = np.ascontiguousarray((q * signs).T)
    phi.setflags(write=False)
    return SamplingMatrix(phi, int(seed) & SEED_MASK, prng_id)


def generate_matrix(rate, n, seed):
    """Seeded ``round(rate*n) x n`` Gaussian operator with orthonormal rows."""
    if n < 2:
        raise DimensionError(f"signal length must be at least 2, got {n}")
    return matrix_from_seed(measurement_count(rate, n), n, seed)


@dataclass(frozen=True, eq=False)
class EncodedSample:
    """Measurements ``Y_i`` of every line plus what the decoder needs to rebuild Phi.

    ``measurements`` has shape ``(num_lines, m_per_line)`` in line order.  A
    whole-image encoding is the special case of one line spanning the image.
    """

    source_rows: int
    source_cols: int
    line_len: int
    m_per_line: int
    seed: int
    measurements: np.ndarray
    prng_id: int = PRNG_ID

    def __post_init__(self):
        total = self.source_rows * self.source_cols
        if self.source_rows < 1 or self.source_cols < 1:
            raise DimensionError("image dimensions must be positive")
        if self.line_len < 2 or total % self.line_len:
            raise DimensionError(
                f"line length {self.line_len} does not tile {total} pixels"
            )
        if not 1 <= self.m_per_line <= self.line_len:
            raise DimensionError(
                f"m_per_line {self.m_per_line} outside [1, {self.line_len}]"
            )
        y = np.array(self.measurements, dtype=np.float64)
        expected = (total // self.line_len, self.m_per_line)
        if y.shape != expected:
            raise DimensionError(f"measurements have shape {y.shape}, expected {expected}")
        if not np.all(np.isfinite(y)):
            raise NonFiniteError("measurements contain non-finite values")
        y.setflags(write=False)
        object.__setattr__(self, "measurements", y)
        object.__setattr__(self, "seed", int(self.seed) & SEED_MASK)

    @property
    def num_lines(self):
        return self.measurements.shape[0]

    @property
    def achieved_rate(self):
        """Measurements per pixel actually transmitted."""
        return self.m_per_line * self.num_lines / (self.source_rows * self.source_cols)

    @property
    def payload_bytes(self):
        return 8 * self.m_per_line * self.num_lines

    def matrix(self):
        return matrix_from_seed(self.m_per_line, self.line_len, self.seed, self.prng_id)

    def __eq__(self, other):
        if not isinstance(other, EncodedSample):
            return NotImplemented
        return (
            self.header_fields() == other.header_fields()
            and np.array_equal(self.measurements, other.measurements)
        )

    def header_fields(self):
        return (
            self.source_rows,
            self.source_cols,
            self.line_len,
            self.m_per_line,
            self.seed,
            self.prng_id,
        )


def iter_encode(lines, matrix):
    """Encode lines one at a time, yielding ``Phi @ x_i`` as each line arrives.

    This is the streaming form of the line encoder: a sensor can feed rows as
    they are read out without ever holding the whole image.
    """
    phi = matrix.entries
    for i, line in enumerate(lines):
        line = np.asarray(line, dtype=np.float64)
        if line.shape != (matrix.n,):
            raise DimensionError(
                f"line {i} has shape {line.shape}, operator expects ({matrix.n},)"
            )
        yield phi @ line


def encode_lines(lineset, matrix):
    """Apply the same operator to every line of ``lineset``."""
    if matrix.n != lineset.line_len:
        raise DimensionError(
            f"operator length {matrix.n} does not match line length {lineset.line_len}"
        )
    y = lineset.lines @ matrix.entries.T
    return EncodedSample(
        lineset.source_rows,
        lineset.source_cols,
        lineset.line_len,
        matrix.m,
        matrix.seed,
        y,
        matrix.prng_id,
    )


def encode_image(image, rate, seed, line_len=None):
    """Line-based encoding of ``image``; ``line_len`` defaults to the width."""
    lineset = to_lines(image, line_len)
    return encode_lines(lineset, generate_matrix(rate, lineset.line_len, seed))


def encode_whole(image, rate, seed, capacity=DEFAULT_CAPACITY):
    """Conventional encoding: one dense operator over the vectorised image.

    Raises :class:`CapacityError` before allocating anything when the
    operator would hold more than ``capacity`` entries.
    """
    if not isinstance(image, Image):
        raise TypeError("encode_whole expects an Image")
    n = image.rows * image.cols
    m = measurement_count(rate, n)
    if m * n > capacity:
        raise CapacityError(m * n, capacity)
    return encode_lines(to_lines(image, n), matrix_from_seed(m, n, seed))


def coherence(a, b):
    """Mutual coherence ``sqrt(n) * max |<row_j(a), col_k(b)>|``.

    ``a`` is a :class:`SamplingMatrix` or an ``(m, n)`` array with unit-norm
    rows; ``b`` is an ``(n, k)`` array with unit-norm columns (normally an
    orthonormal basis, in which case the result lies in ``[1, sqrt(n)]``).
    """
    a = np.asarray(a.entries if isinstance(a, SamplingMatrix) else a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot correlate shapes {a.shape} and {b.shape}")
    if not np.allclose(np.linalg.norm(a, axis=1), 1.0, atol=1e-8):
        raise ValueError("rows of the sensing matrix must have unit norm")
    if not np.allclose(np.linalg.norm(b, axis=0), 1.0, atol=1e-8):
        raise ValueError("columns of the basis must have unit norm")
    n = a.shape[1]
    return math.sqrt(n) * float(np.max(np.abs(a @ b)))
