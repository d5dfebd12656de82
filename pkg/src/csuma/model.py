"""System model of the compressed-sensing phase.

Each active user maps the first ``bp`` bits of its message to an integer
``d`` in ``[0, 2**bp)`` and transmits column ``d`` of a shared sensing
matrix ``A``. The receiver sees the superposition of all transmitted
columns plus unit-variance white Gaussian noise::

    y = A @ x_bar + n

``A`` is built from randomly selected rows of the orthonormal type-II DCT
matrix of size ``2**bp``, with every column rescaled to squared norm
``Np * P1``. The matrix is never materialised: products with ``A`` and
``A.T`` go through the fast DCT, and individual columns are evaluated from
the closed-form cosine expression.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import fft

__all__ = [
    "ConfigError",
    "DimensionError",
    "InfeasibleError",
    "ParameterError",
    "SystemConfig",
    "SensingMatrix",
    "SupportSet",
    "encode_message",
    "build_sensing_matrix",
    "sample_supports",
    "transmit",
    "add_noise",
]


class DimensionError(ValueError):
    """An array or bit-string has the wrong length, or an index is out of range."""


class InfeasibleError(ValueError):
    """The requested dimensions cannot be satisfied."""


class ParameterError(ValueError):
    """A scalar parameter is outside its admissible range."""


class ConfigError(ValueError):
    """Invalid system configuration. ``field`` names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class SystemConfig:
    """Dimensional parameters of the unsourced multiple-access setup.

    Defaults reproduce the reference setup: 100-bit messages over 30000
    channel uses, 15 prefix bits sent in 2000 channel uses.
    """

    b: int = 100
    bp: int = 15
    nt: int = 30000
    np_: int = 2000
    ka: int = 25
    noise_power: float = 1.0

    def __post_init__(self):
        if self.bp < 1:
            raise ConfigError("bp", f"must be >= 1, got {self.bp}")
        if self.b < self.bp:
            raise ConfigError("b", f"must be >= bp={self.bp}, got {self.b}")
        if self.np_ < 1:
            raise ConfigError("np", f"must be >= 1, got {self.np_}")
        if self.np_ > self.n_columns:
            raise ConfigError(
                "np", f"{self.np_} exceeds the 2**bp={self.n_columns} DCT rows available"
            )
        if self.nt < self.np_:
            raise ConfigError("nt", f"must be >= np={self.np_}, got {self.nt}")
        if not 1 <= self.ka <= self.n_columns:
            raise ConfigError("ka", f"must lie in [1, {self.n_columns}], got {self.ka}")
        if not self.noise_power > 0:
            raise ConfigError("noise_power", f"must be positive, got {self.noise_power}")

    @property
    def bd(self) -> int:
        return self.b - self.bp

    @property
    def nc(self) -> int:
        return self.nt - self.np_

    @property
    def n_columns(self) -> int:
        return 1 << self.bp

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


def encode_message(bits: Sequence[int] | str, bp: int) -> tuple[int, np.ndarray]:
    """Map a ``bp``-bit prefix to its integer index and one-hot vector.

    Bits are read most-significant first, so ``"1010"`` maps to 10.
    """
    if isinstance(bits, str):
        bits = [int(ch) for ch in bits]
    bits = list(bits)
    if len(bits) != bp:
        raise DimensionError(f"expected {bp} bits, got {len(bits)}")
    index = 0
    for bit in bits:
        if bit not in (0, 1):
            raise DimensionError(f"bits must be 0 or 1, got {bit!r}")
        index = (index << 1) | int(bit)
    one_hot = np.zeros(1 << bp, dtype=np.int8)
    one_hot[index] = 1
    return index, one_hot


def _dct_coefficients(rows: np.ndarray, n: int) -> np.ndarray:
    c = np.full(rows.shape, np.sqrt(2.0 / n))
    c[rows == 0] = np.sqrt(1.0 / n)
    return c


@functools.lru_cache(maxsize=8)
def _cos_table(n: int) -> np.ndarray:
    table = np.cos(np.pi * np.arange(4 * n) / (2 * n))
    table.setflags(write=False)
    return table


def _dct_entries(rows: np.ndarray, cols: np.ndarray, n: int) -> np.ndarray:
    """Entries ``D[rows, cols]`` of the orthonormal DCT-II matrix of size n."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    # exact integer reduction of the phase keeps large-n entries accurate
    phase = (rows[:, None] * (2 * cols[None, :] + 1)) % (4 * n)
    return _dct_coefficients(rows, n)[:, None] * _cos_table(n)[phase]


def _subsampled_column_norms_sq(rows: np.ndarray, n: int) -> np.ndarray:
    """Squared norms of all columns of ``D[rows, :]`` in O(n log n).

    Uses cos^2(t) = (1 + cos 2t) / 2; the cos 2t sum is a DCT-III of the
    row weights folded back into [0, n).
    """
    w = 0.5 * _dct_coefficients(rows, n) ** 2
    v = np.zeros(n)
    m = 2 * rows
    low = m < n
    np.add.at(v, m[low], w[low])
    high = m > n
    np.add.at(v, 2 * n - m[high], -w[high])
    v[1:] *= 0.5
    return w.sum() + fft.dct(v, type=3)


@dataclass(frozen=True, eq=False)
class SensingMatrix:
    """Real ``Np x 2**bp`` sensing matrix, stored as DCT rows plus column weights.

    Column ``j`` equals ``weights[j] * D[rows, j]`` where ``D`` is the
    orthonormal DCT-II matrix of size ``2**bp``. Instances are immutable
    and may be shared between worker processes.
    """

    bp: int
    rows: np.ndarray
    p1: float
    seed: int | None
    unit_norms_sq: np.ndarray = field(repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.rows.setflags(write=False)
        self.unit_norms_sq.setflags(write=False)
        weights = np.sqrt(self.n_rows * self.p1 / self.unit_norms_sq)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_columns(self) -> int:
        return 1 << self.bp

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_columns

    @property
    def row_selection(self) -> np.ndarray:
        return self.rows

    def with_power(self, p1: float) -> "SensingMatrix":
        """Same row selection, columns rescaled to the new power."""
        if not p1 > 0:
            raise ParameterError(f"p1 must be positive, got {p1}")
        return SensingMatrix(self.bp, self.rows, float(p1), self.seed, self.unit_norms_sq)

    def columns(self, indices) -> np.ndarray:
        """Dense ``Np x len(indices)`` block of the selected columns."""
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_columns):
            raise DimensionError(f"column index out of range [0, {self.n_columns})")
        return _dct_entries(self.rows, idx, self.n_columns) * self.weights[idx]

    def column(self, j: int) -> np.ndarray:
        return self.columns([j])[:, 0]

    @functools.cached_property
    def _row_autocorrelation(self) -> np.ndarray:
        # h[m] = 1/2 sum_{k in rows} c_k^2 cos(pi k m / n), m in [0, 2n)
        n = self.n_columns
        u = np.zeros(2 * n)
        u[self.rows] = _dct_coefficients(self.rows, n) ** 2
        return 0.5 * np.fft.rfft(u).real[np.r_[0 : n + 1, n - 1 : 0 : -1]]

    def gram(self, indices) -> np.ndarray:
        """``A[:, S].T @ A[:, S]`` in O(|S|^2), without forming the columns.

        cos(a) cos(b) = (cos(a - b) + cos(a + b)) / 2 turns every entry into
        two lookups in a table built once by FFT.
        """
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_columns):
            raise DimensionError(f"column index out of range [0, {self.n_columns})")
        h = self._row_autocorrelation
        diff = np.abs(idx[:, None] - idx[None, :])
        total = idx[:, None] + idx[None, :] + 1
        w = self.weights[idx]
        return np.outer(w, w) * (h[diff] + h[total])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """``A @ x`` for a length-``2**bp`` vector."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_columns,):
            raise DimensionError(f"expected shape ({self.n_columns},), got {x.shape}")
        return fft.dct(self.weights * x, norm="ortho")[self.rows]

    def rmatvec(self, r: np.ndarray) -> np.ndarray:
        """``A.T @ r`` for a length-``Np`` vector."""
        r = np.asarray(r, dtype=float)
        if r.shape != (self.n_rows,):
            raise DimensionError(f"expected shape ({self.n_rows},), got {r.shape}")
        full = np.zeros(self.n_columns)
        full[self.rows] = r
        return self.weights * fft.idct(full, norm="ortho")

    def dense(self) -> np.ndarray:
        """Materialise the full matrix. Only sensible for small ``bp``."""
        return self.columns(np.arange(self.n_columns))

    @property
    def entries(self) -> np.ndarray:
        return self.dense()


def build_sensing_matrix(bp: int, np_: int, p1: float, seed: int | None) -> SensingMatrix:
    """Select ``np_`` distinct DCT rows uniformly at random and normalise columns.

    Every column ends up with squared norm ``np_ * p1``. The same arguments
    always give the same matrix.
    """
    n = 1 << bp
    if np_ < 1 or np_ > n:
        raise InfeasibleError(f"np={np_} must lie in [1, 2**bp={n}]")
    if not p1 > 0:
        raise ParameterError(f"p1 must be positive, got {p1}")
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(n, size=np_, replace=False)).astype(np.int64)
    return SensingMatrix(bp, rows, float(p1), seed, _subsampled_column_norms_sq(rows, n))


@dataclass(frozen=True, eq=False)
class SupportSet:
    """Active column indices of one channel realisation, sorted ascending.

    With ``allow_duplicates`` the indices form a multiset: two users may
    share a prefix and the corresponding entry of ``x_bar`` is then 2.
    """

    indices: np.ndarray
    allow_duplicates: bool = False

    def __post_init__(self):
        self.indices.setflags(write=False)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def distinct(self) -> frozenset[int]:
        return frozenset(int(i) for i in self.indices)

    def one_hot_sum(self, n_columns: int) -> np.ndarray:
        return np.bincount(self.indices, minlength=n_columns)


def sample_supports(ka: int, bp: int, seed, allow_duplicates: bool = False) -> SupportSet:
    """Draw the prefixes of ``ka`` users uniformly from ``[0, 2**bp)``.

    ``seed`` may be an integer, a seed sequence or an existing
    ``numpy.random.Generator`` (which is then advanced).
    """
    n = 1 << bp
    if ka < 0:
        raise ParameterError(f"ka must be non-negative, got {ka}")
    rng = np.random.default_rng(seed)
    if allow_duplicates:
        idx = rng.integers(0, n, size=ka)
    else:
        if ka > n:
            raise InfeasibleError(f"cannot draw {ka} distinct indices out of {n}")
        idx = rng.choice(n, size=ka, replace=False)
    return SupportSet(np.sort(idx).astype(np.int64), allow_duplicates)


def transmit(matrix: SensingMatrix, supports: SupportSet | Sequence[int]) -> np.ndarray:
    """Noiseless channel output: sum of the columns picked by all users."""
    idx = supports.indices if isinstance(supports, SupportSet) else np.asarray(supports, np.int64)
    if idx.size == 0:
        return np.zeros(matrix.n_rows)
    return matrix.columns(idx).sum(axis=1)


def add_noise(signal: np.ndarray, seed, variance: float = 1.0) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise of the given variance."""
    signal = np.asarray(signal, dtype=float)
    if variance == 0:
        return signal.copy()
    if variance < 0:
        raise ParameterError(f"variance must be non-negative, got {variance}")
    rng = np.random.default_rng(seed)
    return signal + np.sqrt(variance) * rng.standard_normal(signal.shape)
