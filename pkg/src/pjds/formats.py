"""GPU-oriented storage formats built from CSR: ELLPACK, ELLPACK-R and pJDS.

All three keep the column-major ("one jagged diagonal after the other")
layout that gives coalesced loads when consecutive rows map to
consecutive threads of a warp.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .matrix import CsrMatrix, MatrixError

DEFAULT_WARP_SIZE = 32
VALUE_BYTES = {"DP": 8, "SP": 4}
INDEX_BYTES = 4
PAD_COLUMN = 0


class EmptyRowError(MatrixError):
    pass


def _round_up(n: int, multiple: int) -> int:
    return -(-n // multiple) * multiple


def _check_rows(m: CsrMatrix, block: int, what: str, allow_empty: bool = False) -> np.ndarray:
    if block < 1:
        raise ValueError(f"{what} must be >= 1, got {block}")
    lengths = m.row_lengths()
    if m.n_rows == 0:
        raise EmptyRowError("matrix has no rows")
    empty = np.flatnonzero(lengths == 0)
    if empty.size and not allow_empty:
        raise EmptyRowError(f"row {empty[0]} is empty ({empty.size} empty rows in total)")
    return lengths


@dataclass(frozen=True, eq=False)
class EllpackMatrix:
    n_rows: int
    n_cols: int
    n_rows_padded: int
    width: int
    warp_size: int
    nnz: int
    # shape (width, n_rows_padded); flat index j * n_rows_padded + i
    values: np.ndarray
    col_idx: np.ndarray
    # host-side bookkeeping only, plain ELLPACK keeps no row lengths on the device
    row_len: np.ndarray

    format_name = "ELLPACK"

    @property
    def stored_entries(self) -> int:
        return self.n_rows_padded * self.width

    def ellpack_stored_entries(self) -> int:
        return self.stored_entries

    def aux_bytes(self) -> int:
        return 0

    def entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(row, col, value) of every non-padding slot."""
        return _ellpack_entries(self, self.row_len)


@dataclass(frozen=True, eq=False)
class EllpackRMatrix(EllpackMatrix):
    format_name = "ELLPACK-R"

    @property
    def rowmax(self) -> np.ndarray:
        """Per padded row non-zero count, 0 for pad rows."""
        return self.row_len

    def aux_bytes(self) -> int:
        return INDEX_BYTES * self.n_rows_padded


def _ellpack_entries(m: EllpackMatrix, lengths: np.ndarray):
    rows, slots = [], []
    for j in range(m.width):
        active = np.flatnonzero(lengths > j)
        rows.append(active)
        slots.append(np.full(active.size, j))
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    slots = np.concatenate(slots) if slots else np.zeros(0, dtype=np.int64)
    return rows, m.col_idx[slots, rows], m.values[slots, rows]


def _fill_ellpack(m: CsrMatrix, warp_size: int, allow_empty: bool):
    lengths = _check_rows(m, warp_size, "warp_size", allow_empty)
    width = int(lengths.max())
    n_pad = _round_up(m.n_rows, warp_size)
    values = np.zeros((width, n_pad))
    col_idx = np.full((width, n_pad), PAD_COLUMN, dtype=np.int64)
    rows = m.row_indices()
    slot = np.arange(m.nnz) - m.row_ptr[rows]
    values[slot, rows] = m.values
    col_idx[slot, rows] = m.col_idx
    rowmax = np.zeros(n_pad, dtype=np.int64)
    rowmax[: m.n_rows] = lengths
    for arr in (values, col_idx, rowmax):
        arr.setflags(write=False)
    return n_pad, width, warp_size, m.nnz, values, col_idx, rowmax


def build_ellpack(m: CsrMatrix, warp_size: int = DEFAULT_WARP_SIZE) -> EllpackMatrix:
    """Shift each row's non-zeros to the left and store the N x max-row-length block column by column.

    Padding slots hold value 0.0 and column index 0.
    """
    return EllpackMatrix(m.n_rows, m.n_cols, *_fill_ellpack(m, warp_size, False))


def build_ellpack_r(m: CsrMatrix, warp_size: int = DEFAULT_WARP_SIZE,
                    allow_empty_rows: bool = False) -> EllpackRMatrix:
    """ELLPACK layout plus per-row lengths, so the kernel can skip padding.

    ``allow_empty_rows`` admits rows with no entries (rowmax 0), which the
    local/nonlocal parts of a distributed row block routinely have.
    """
    return EllpackRMatrix(m.n_rows, m.n_cols, *_fill_ellpack(m, warp_size, allow_empty_rows))


@dataclass(frozen=True, eq=False)
class PjdsMatrix:
    """Padded jagged diagonals storage.

    Rows are sorted by descending length (``permutation[new] = old``) and
    grouped into blocks of ``block_rows``; every row of a block is padded
    to the block's longest row. Jagged diagonal ``j`` occupies
    ``values[col_start[j]:col_start[j + 1]]`` and covers the leading
    ``col_start[j + 1] - col_start[j]`` permuted rows.
    """

    n_rows: int
    n_cols: int
    n_rows_padded: int
    block_rows: int
    nnz: int
    permutation: np.ndarray
    values: np.ndarray
    col_idx: np.ndarray
    col_start: np.ndarray
    rowmax: np.ndarray  # true row lengths in permuted order, 0 for virtual rows
    block_max: np.ndarray

    format_name = "pJDS"

    @property
    def width(self) -> int:
        return int(self.col_start.size - 1)

    @property
    def stored_entries(self) -> int:
        return int(self.col_start[-1])

    @property
    def n_blocks(self) -> int:
        return int(self.block_max.size)

    def ellpack_stored_entries(self) -> int:
        """Storage an ELLPACK matrix with warp_size = block_rows would need for the same source."""
        return _round_up(self.n_rows, self.block_rows) * self.width

    def aux_bytes(self) -> int:
        return INDEX_BYTES * (self.col_start.size + self.n_rows_padded)

    def column_heights(self) -> np.ndarray:
        return np.diff(self.col_start)

    def entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(row, col, value) of every non-padding slot, rows mapped back to the original numbering."""
        rows, flat = [], []
        heights = self.column_heights()
        for j in range(self.width):
            active = np.flatnonzero(self.rowmax[: heights[j]] > j)
            rows.append(active)
            flat.append(self.col_start[j] + active)
        rows = np.concatenate(rows)
        flat = np.concatenate(flat)
        return self.permutation[rows], self.col_idx[flat], self.values[flat]


def build_pjds(m: CsrMatrix, block_rows: int = DEFAULT_WARP_SIZE) -> PjdsMatrix:
    lengths = _check_rows(m, block_rows, "block_rows")
    b = block_rows
    # stable: equal-length rows keep their original relative order
    perm = np.argsort(-lengths, kind="stable")
    n_pad = _round_up(m.n_rows, b)
    sorted_len = np.zeros(n_pad, dtype=np.int64)
    sorted_len[: m.n_rows] = lengths[perm]
    block_max = sorted_len[::b].copy()
    width = int(block_max[0])

    # blocks with max > j, times the block height
    at_most = np.cumsum(np.bincount(block_max, minlength=width + 1))[:width]
    heights = b * (block_max.size - at_most)
    col_start = np.zeros(width + 1, dtype=np.int64)
    np.cumsum(heights, out=col_start[1:])

    inv = np.empty(m.n_rows, dtype=np.int64)
    inv[perm] = np.arange(m.n_rows)
    rows = m.row_indices()
    slot = np.arange(m.nnz) - m.row_ptr[rows]
    flat = col_start[slot] + inv[rows]
    values = np.zeros(col_start[-1])
    col_idx = np.full(col_start[-1], PAD_COLUMN, dtype=np.int64)
    values[flat] = m.values
    col_idx[flat] = m.col_idx

    for arr in (perm, values, col_idx, col_start, sorted_len, block_max):
        arr.setflags(write=False)
    return PjdsMatrix(m.n_rows, m.n_cols, n_pad, b, m.nnz, perm, values, col_idx,
                      col_start, sorted_len, block_max)


def permute_vector(v: np.ndarray, p: np.ndarray, direction: str = "forward") -> np.ndarray:
    """Move a vector into (``forward``) or out of (``inverse``) the permuted row basis.

    ``p[new] = old``, so forward gives ``out[new] = v[p[new]]``.
    """
    v = np.asarray(v)
    p = np.asarray(p)
    if v.shape[0] != p.shape[0]:
        raise ValueError(f"vector length {v.shape[0]} does not match permutation length {p.shape[0]}")
    if direction == "forward":
        return v[p]
    if direction == "inverse":
        out = np.empty_like(v)
        out[p] = v
        return out
    raise ValueError(f"direction must be 'forward' or 'inverse', not {direction!r}")


# -- footprint -----------------------------------------------------------------

AnyFormat = EllpackMatrix | EllpackRMatrix | PjdsMatrix


@dataclass(frozen=True)
class FootprintReport:
    format: str
    precision: str
    nnz: int
    stored_entries: int
    bytes_values: int
    bytes_indices: int
    bytes_aux: int
    padding_overhead_fraction: float
    data_reduction_vs_ellpack: float

    @property
    def bytes_total(self) -> int:
        return self.bytes_values + self.bytes_indices + self.bytes_aux

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.to_dict().items())

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def footprint(m: AnyFormat, precision: str = "DP") -> FootprintReport:
    """Device memory accounting for a built matrix.

    The pJDS permutation lives on the host and is not counted.
    """
    if precision not in VALUE_BYTES:
        raise ValueError(f"precision must be one of {sorted(VALUE_BYTES)}")
    stored = m.stored_entries
    return FootprintReport(
        format=m.format_name,
        precision=precision,
        nnz=m.nnz,
        stored_entries=stored,
        bytes_values=VALUE_BYTES[precision] * stored,
        bytes_indices=INDEX_BYTES * stored,
        bytes_aux=m.aux_bytes(),
        padding_overhead_fraction=stored / m.nnz - 1.0,
        data_reduction_vs_ellpack=1.0 - stored / m.ellpack_stored_entries(),
    )


def csr_min_bytes(m: CsrMatrix, precision: str = "DP") -> int:
    """Bytes of a minimal CSR representation with 4-byte indices: values, column indices, row pointers."""
    return (VALUE_BYTES[precision] + INDEX_BYTES) * m.nnz + INDEX_BYTES * (m.n_rows + 1)
