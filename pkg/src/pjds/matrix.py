"""Canonical sparse matrix types, Matrix Market / JGD1 I/O and synthetic generators."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np


class MatrixError(ValueError):
    """Base class for malformed or inconsistent matrix data."""


class MatrixMarketError(MatrixError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateEntryError(MatrixError):
    pass


class InfeasibleSpecError(MatrixError):
    pass


@dataclass(frozen=True)
class CooMatrix:
    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise MatrixError("rows, cols and values must be 1-d arrays of equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.n_rows:
                raise MatrixError("row index out of range")
            if cols.min() < 0 or cols.max() >= self.n_cols:
                raise MatrixError("column index out of range")
        for name, arr in (("rows", rows), ("cols", cols), ("values", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_entries(cls, n_rows: int, n_cols: int, entries: Iterable[tuple[int, int, float]]):
        entries = list(entries)
        if entries:
            r, c, v = zip(*entries)
        else:
            r, c, v = (), (), ()
        return cls(n_rows, n_cols, np.array(r, dtype=np.int64),
                   np.array(c, dtype=np.int64), np.array(v, dtype=np.float64))

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()))


@dataclass(frozen=True)
class CsrMatrix:
    """Compressed sparse row matrix with sorted, duplicate-free column indices per row.

    Empty rows are allowed here; the GPU-style format builders reject them.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        row_ptr = np.ascontiguousarray(self.row_ptr, dtype=np.int64)
        col_idx = np.ascontiguousarray(self.col_idx, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if row_ptr.shape != (self.n_rows + 1,):
            raise MatrixError(f"row_ptr must have length n_rows+1={self.n_rows + 1}")
        if row_ptr[0] != 0 or np.any(np.diff(row_ptr) < 0):
            raise MatrixError("row_ptr must start at 0 and be nondecreasing")
        if row_ptr[-1] != col_idx.size or col_idx.shape != values.shape:
            raise MatrixError("row_ptr[-1] must equal nnz = len(col_idx) = len(values)")
        if col_idx.size:
            if col_idx.min() < 0 or col_idx.max() >= self.n_cols:
                raise MatrixError("column index out of range")
            # strictly increasing inside a row: every step that stays in the row must be > 0
            step = np.diff(col_idx)
            row_start = np.zeros(col_idx.size, dtype=bool)
            row_start[row_ptr[:-1][np.diff(row_ptr) > 0]] = True
            if np.any(step[~row_start[1:]] <= 0):
                raise MatrixError("column indices must be strictly increasing within each row")
        for name, arr in (("row_ptr", row_ptr), ("col_idx", col_idx), ("values", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def row_lengths(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (the COO row array)."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), self.row_lengths())

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.shape)
        dense[self.row_indices(), self.col_idx] = self.values
        return dense

    def select_rows(self, begin: int, end: int) -> "CsrMatrix":
        lo, hi = self.row_ptr[begin], self.row_ptr[end]
        return CsrMatrix(end - begin, self.n_cols, self.row_ptr[begin:end + 1] - lo,
                         self.col_idx[lo:hi], self.values[lo:hi])

    def equals(self, other: "CsrMatrix") -> bool:
        return (self.shape == other.shape
                and np.array_equal(self.row_ptr, other.row_ptr)
                and np.array_equal(self.col_idx, other.col_idx)
                and np.array_equal(self.values.view(np.uint64), other.values.view(np.uint64)))


def coo_to_csr(m: CooMatrix) -> CsrMatrix:
    order = np.lexsort((m.cols, m.rows))
    rows, cols, values = m.rows[order], m.cols[order], m.values[order]
    if rows.size > 1:
        dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
        if dup.any():
            k = int(np.argmax(dup))
            raise DuplicateEntryError(f"duplicate entry at ({rows[k]}, {cols[k]})")
    row_ptr = np.zeros(m.n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=m.n_rows), out=row_ptr[1:])
    return CsrMatrix(m.n_rows, m.n_cols, row_ptr, cols, values)


def csr_to_coo(m: CsrMatrix) -> CooMatrix:
    return CooMatrix(m.n_rows, m.n_cols, m.row_indices(), m.col_idx.copy(), m.values.copy())


# -- Matrix Market ----------------------------------------------------------

_MM_FIELDS = {"real", "integer", "double"}
_MM_SYMMETRY = {"general", "symmetric"}


def read_matrix_market(path: str | Path) -> CooMatrix:
    """Read a coordinate Matrix Market file into 0-based COO form.

    Symmetric files are expanded to full storage. Pattern, complex and
    array-format files are rejected.
    """
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)

    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise MatrixMarketError("missing '%%MatrixMarket' banner", 1)
    obj, fmt, fld, sym = (h.lower() for h in header[1:])
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object '{obj}'", 1)
    if fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format '{fmt}', only 'coordinate'", 1)
    if fld == "pattern":
        raise MatrixMarketError("pattern-only matrices carry no values and are not supported", 1)
    if fld not in _MM_FIELDS:
        raise MatrixMarketError(f"unsupported field '{fld}'", 1)
    if sym not in _MM_SYMMETRY:
        raise MatrixMarketError(f"unsupported symmetry '{sym}'", 1)

    lineno = 1
    size_line = None
    for lineno in range(2, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if text and not text.startswith("%"):
            size_line = text
            break
    if size_line is None:
        raise MatrixMarketError("missing size line", lineno)
    try:
        n_rows, n_cols, nnz = (int(t) for t in size_line.split())
    except ValueError:
        raise MatrixMarketError(f"malformed size line '{size_line}'", lineno) from None
    if min(n_rows, n_cols, nnz) < 0:
        raise MatrixMarketError("negative dimension in size line", lineno)

    rows, cols, vals = [], [], []
    for k in range(lineno + 1, len(lines) + 1):
        text = lines[k - 1].strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"expected 'row col value', got '{text}'", k)
        try:
            i, j = int(parts[0]), int(parts[1])
            v = float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"cannot parse entry '{text}'", k) from None
        if not (1 <= i <= n_rows and 1 <= j <= n_cols):
            raise MatrixMarketError(f"index ({i}, {j}) out of bounds for {n_rows}x{n_cols}", k)
        if len(rows) == nnz:
            raise MatrixMarketError(f"more entries than the declared {nnz}", k)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if len(rows) != nnz:
        raise MatrixMarketError(f"declared {nnz} entries but found {len(rows)}", lineno)

    r = np.array(rows, dtype=np.int64)
    c = np.array(cols, dtype=np.int64)
    v = np.array(vals, dtype=np.float64)
    if sym == "symmetric":
        if n_rows != n_cols:
            raise MatrixMarketError("symmetric matrix must be square", 1)
        if np.any(c > r):
            raise MatrixMarketError("symmetric file has entries above the diagonal", 1)
        off = r != c
        r, c, v = np.concatenate([r, c[off]]), np.concatenate([c, r[off]]), np.concatenate([v, v[off]])
    return CooMatrix(n_rows, n_cols, r, c, v)


def write_matrix_market(dest, m: CsrMatrix | CooMatrix) -> None:
    """Write ``m`` as a general real coordinate file; ``dest`` is a path or a text stream."""
    if not hasattr(dest, "write"):
        with open(dest, "w") as fh:
            write_matrix_market(fh, m)
        return
    coo = csr_to_coo(m) if isinstance(m, CsrMatrix) else m
    dest.write("%%MatrixMarket matrix coordinate real general\n")
    dest.write(f"{coo.n_rows} {coo.n_cols} {coo.nnz}\n")
    for i, j, v in zip(coo.rows.tolist(), coo.cols.tolist(), coo.values.tolist()):
        dest.write(f"{i + 1} {j + 1} {v!r}\n")


# -- JGD1 binary snapshot ---------------------------------------------------

JGD_MAGIC = b"JGD1"
_JGD_HEADER = struct.Struct("<4sQQQ")


def save_jgd(path: str | Path, m: CsrMatrix) -> None:
    with open(path, "wb") as fh:
        fh.write(_JGD_HEADER.pack(JGD_MAGIC, m.n_rows, m.n_cols, m.nnz))
        fh.write(m.row_ptr.astype("<u8").tobytes())
        fh.write(m.col_idx.astype("<u8").tobytes())
        fh.write(m.values.astype("<f8").tobytes())


def load_jgd(path: str | Path) -> CsrMatrix:
    data = Path(path).read_bytes()
    if len(data) < _JGD_HEADER.size:
        raise MatrixError("truncated JGD1 header")
    magic, n_rows, n_cols, nnz = _JGD_HEADER.unpack_from(data)
    if magic != JGD_MAGIC:
        raise MatrixError(f"bad magic {magic!r}, expected {JGD_MAGIC!r}")
    expected = _JGD_HEADER.size + 8 * (n_rows + 1) + 16 * nnz
    if len(data) != expected:
        raise MatrixError(f"JGD1 payload is {len(data)} bytes, expected {expected}")
    off = _JGD_HEADER.size
    row_ptr = np.frombuffer(data, "<u8", n_rows + 1, off).astype(np.int64)
    off += 8 * (n_rows + 1)
    col_idx = np.frombuffer(data, "<u8", nnz, off).astype(np.int64)
    off += 8 * nnz
    values = np.frombuffer(data, "<f8", nnz, off).astype(np.float64)
    return CsrMatrix(n_rows, n_cols, row_ptr, col_idx, values)


def load_matrix(path: str | Path) -> CsrMatrix:
    """Load a CSR matrix from a .mtx or JGD1 file, sniffing the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == JGD_MAGIC:
        return load_jgd(path)
    return coo_to_csr(read_matrix_market(path))


# -- row length statistics ----------------------------------------------------

@dataclass(frozen=True)
class RowLengthHistogram:
    bins: dict[int, int]
    n_rows: int
    nnz: int

    @property
    def min_len(self) -> int:
        return min(self.bins) if self.bins else 0

    @property
    def max_len(self) -> int:
        return max(self.bins) if self.bins else 0

    @property
    def mean_len(self) -> float:
        return self.nnz / self.n_rows if self.n_rows else 0.0

    def relative(self) -> dict[int, float]:
        return {k: v / self.n_rows for k, v in self.bins.items()}

    def to_dict(self) -> dict:
        return {"n_rows": self.n_rows, "nnz": self.nnz, "min_len": self.min_len,
                "max_len": self.max_len, "mean_len": self.mean_len,
                "bins": {str(k): v for k, v in sorted(self.bins.items())}}


def histogram(m: CsrMatrix) -> RowLengthHistogram:
    lengths, counts = np.unique(m.row_lengths(), return_counts=True)
    return RowLengthHistogram(dict(zip(lengths.tolist(), counts.tolist())), m.n_rows, m.nnz)


# -- generators ---------------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    k: int


@dataclass(frozen=True)
class Uniform:
    lo: int
    hi: int


@dataclass(frozen=True)
class Clustered:
    """A fraction of rows at the peak length, the remainder uniform in [tail_lo, tail_hi].

    tail_hi defaults to peak_len - 1.
    """

    peak_fraction: float
    peak_len: int
    tail_lo: int
    tail_hi: int | None = None


@dataclass(frozen=True)
class Adversarial:
    """Row 0 fully populated, every other row holds only its diagonal entry."""


@dataclass(frozen=True)
class Banded:
    offsets: tuple[int, ...]


Distribution = Constant | Uniform | Clustered | Adversarial | Banded


@dataclass(frozen=True)
class GeneratorSpec:
    n_rows: int
    distribution: Distribution
    seed: int = 0
    n_cols: int | None = None

    @property
    def cols(self) -> int:
        return self.n_rows if self.n_cols is None else self.n_cols


def _row_lengths(spec: GeneratorSpec, rng: np.random.Generator) -> np.ndarray:
    n, d = spec.n_rows, spec.distribution
    if isinstance(d, Constant):
        lengths = np.full(n, d.k, dtype=np.int64)
    elif isinstance(d, Uniform):
        if d.lo > d.hi:
            raise InfeasibleSpecError(f"uniform bounds reversed: {d.lo} > {d.hi}")
        lengths = rng.integers(d.lo, d.hi, endpoint=True, size=n)
    elif isinstance(d, Clustered):
        tail_hi = d.peak_len - 1 if d.tail_hi is None else d.tail_hi
        if not 0.0 <= d.peak_fraction <= 1.0:
            raise InfeasibleSpecError("peak_fraction must lie in [0, 1]")
        if d.tail_lo > tail_hi or tail_hi > d.peak_len:
            raise InfeasibleSpecError("clustered tail must satisfy tail_lo <= tail_hi <= peak_len")
        n_peak = math.ceil(d.peak_fraction * n)
        tail = rng.integers(d.tail_lo, tail_hi, endpoint=True, size=n - n_peak)
        lengths = np.concatenate([np.full(n_peak, d.peak_len, dtype=np.int64), tail])
        rng.shuffle(lengths)
    else:
        raise TypeError(f"no length model for {d!r}")
    return lengths.astype(np.int64)


def generate(spec: GeneratorSpec) -> CsrMatrix:
    """Draw a random matrix whose row lengths follow ``spec.distribution``.

    Row lengths are drawn first, then distinct columns per row; values are
    uniform in [-1, 1]. Identical specs give identical matrices.
    """
    n, n_cols = spec.n_rows, spec.cols
    if n < 1 or n_cols < 1:
        raise InfeasibleSpecError("matrix must have at least one row and column")
    rng = np.random.default_rng(spec.seed)
    d = spec.distribution

    if isinstance(d, Adversarial):
        rows = [np.arange(n_cols, dtype=np.int64)]
        rows += [np.array([i % n_cols], dtype=np.int64) for i in range(1, n)]
    elif isinstance(d, Banded):
        offsets = np.array(sorted(set(d.offsets)), dtype=np.int64)
        if offsets.size == 0:
            raise InfeasibleSpecError("banded spec needs at least one offset")
        rows = []
        for i in range(n):
            c = i + offsets
            c = c[(c >= 0) & (c < n_cols)]
            if c.size == 0:
                raise InfeasibleSpecError(f"offsets {tuple(offsets)} leave row {i} empty")
            rows.append(c)
    else:
        lengths = _row_lengths(spec, rng)
        if lengths.min() < 1:
            raise InfeasibleSpecError("every row needs at least one non-zero")
        if lengths.max() > n_cols:
            raise InfeasibleSpecError(f"row length {lengths.max()} exceeds n_cols={n_cols}")
        rows = [np.sort(rng.choice(n_cols, size=k, replace=False)) for k in lengths.tolist()]

    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum([r.size for r in rows], out=row_ptr[1:])
    col_idx = np.concatenate(rows)
    values = rng.uniform(-1.0, 1.0, size=col_idx.size)
    return CsrMatrix(n, n_cols, row_ptr, col_idx, values)


def parse_generator(text: str, n_rows: int, seed: int = 0) -> GeneratorSpec:
    """Parse ``family[:a,b,...]``, e.g. ``uniform:1,4`` or ``clustered:0.8,144,20``."""
    family, _, args = text.partition(":")
    nums = [a for a in args.split(",") if a.strip()] if args else []
    family = family.strip().lower()
    try:
        if family == "constant":
            (k,) = nums
            dist = Constant(int(k))
        elif family == "uniform":
            lo, hi = nums
            dist = Uniform(int(lo), int(hi))
        elif family == "clustered":
            if len(nums) not in (3, 4):
                raise ValueError
            tail_hi = int(nums[3]) if len(nums) == 4 else None
            dist = Clustered(float(nums[0]), int(nums[1]), int(nums[2]), tail_hi)
        elif family == "adversarial":
            if nums:
                raise ValueError
            dist = Adversarial()
        elif family == "banded":
            dist = Banded(tuple(int(o) for o in nums))
        else:
            raise InfeasibleSpecError(f"unknown generator family '{family}'")
    except InfeasibleSpecError:
        raise
    except ValueError:
        raise InfeasibleSpecError(f"bad arguments for generator '{text}'") from None
    return GeneratorSpec(n_rows, dist, seed)
