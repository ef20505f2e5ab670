"""spMVM kernels for CSR, ELLPACK, ELLPACK-R and pJDS.

Every kernel accumulates each row left to right over its stored entries,
starting from 0.0 (or from ``out`` when given). Rows are independent, so
any row partition gives bitwise-identical results; that is what the
chunk-parallel driver relies on.

The kernels vectorize across rows and loop over the jagged diagonals,
which is the order a SIMT device executes them in.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .formats import INDEX_BYTES, VALUE_BYTES, EllpackMatrix, EllpackRMatrix, PjdsMatrix
from .matrix import CsrMatrix


class DimensionError(ValueError):
    pass


class UnmappedColumnError(ValueError):
    pass


@dataclass
class SpmvStats:
    """Work and traffic counters of one spMVM.

    ``padded_fma`` counts stored zeros that were actually multiplied;
    ``idle_lane_cycles`` counts lane slots spent waiting for the longest
    row of the warp (or pJDS block).
    """

    useful_fma: int = 0
    padded_fma: int = 0
    idle_lane_cycles: int = 0
    bytes_matrix: int = 0
    bytes_rhs_worst: int = 0
    bytes_lhs: int = 0

    def __add__(self, other: "SpmvStats") -> "SpmvStats":
        return SpmvStats(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))


def _check_x(n_cols: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != n_cols:
        raise DimensionError(f"x has shape {x.shape}, expected ({n_cols},)")
    return x


def _out(n: int, out) -> np.ndarray:
    if out is None:
        return np.zeros(n)
    if out.shape != (n,):
        raise DimensionError(f"out has shape {out.shape}, expected ({n},)")
    return out


def _idle_lanes(lengths: np.ndarray, warp: int) -> int:
    warps = lengths.reshape(-1, warp)
    return int((warps.max(axis=1, keepdims=True) - warps).sum())


# -- CSR -------------------------------------------------------------------------

def _csr_rows(m: CsrMatrix, x: np.ndarray, lo: int, hi: int, y: np.ndarray) -> None:
    starts = m.row_ptr[lo:hi]
    lengths = m.row_ptr[lo + 1:hi + 1] - starts
    if lengths.size == 0:
        return
    for j in range(int(lengths.max())):
        active = np.flatnonzero(lengths > j)
        k = starts[active] + j
        y[active] += m.values[k] * x[m.col_idx[k]]


def spmv_csr(m: CsrMatrix, x, out: np.ndarray | None = None) -> np.ndarray:
    """y = A x, or ``out += A x`` continuing each row's running sum when ``out`` is given."""
    x = _check_x(m.n_cols, x)
    y = _out(m.n_rows, out)
    _csr_rows(m, x, 0, m.n_rows, y)
    return y


# -- ELLPACK family ------------------------------------------------------------------

def _ellpack_rows(m: EllpackMatrix, x, lo, hi, y) -> None:
    # padding slots are executed: value 0.0 times x[0]
    for j in range(m.width):
        y += m.values[j, lo:hi] * x[m.col_idx[j, lo:hi]]


def _ellpack_r_rows(m: EllpackRMatrix, x, lo, hi, y) -> None:
    rowmax = m.rowmax[lo:hi]
    for j in range(int(rowmax.max(initial=0))):
        active = np.flatnonzero(rowmax > j)
        i = lo + active
        y[active] += m.values[j, i] * x[m.col_idx[j, i]]


def spmv_ellpack(m: EllpackMatrix, x, precision: str = "DP") -> tuple[np.ndarray, SpmvStats]:
    x = _check_x(m.n_cols, x)
    y = np.zeros(m.n_rows_padded)
    _ellpack_rows(m, x, 0, m.n_rows_padded, y)
    vb = VALUE_BYTES[precision]
    executed = m.stored_entries
    stats = SpmvStats(
        useful_fma=m.nnz,
        padded_fma=executed - m.nnz,
        idle_lane_cycles=0,
        bytes_matrix=executed * (vb + INDEX_BYTES),
        bytes_rhs_worst=executed * vb,
        bytes_lhs=2 * vb * m.n_rows_padded,
    )
    return y[: m.n_rows], stats


def spmv_ellpack_r(m: EllpackRMatrix, x, out: np.ndarray | None = None,
                   precision: str = "DP") -> tuple[np.ndarray, SpmvStats]:
    x = _check_x(m.n_cols, x)
    y = np.zeros(m.n_rows_padded)
    if out is not None:
        y[: m.n_rows] = _out(m.n_rows, out)
    _ellpack_r_rows(m, x, 0, m.n_rows_padded, y)
    if out is not None:
        out[:] = y[: m.n_rows]
    vb = VALUE_BYTES[precision]
    stats = SpmvStats(
        useful_fma=m.nnz,
        padded_fma=0,
        idle_lane_cycles=_idle_lanes(m.rowmax, m.warp_size),
        bytes_matrix=m.nnz * (vb + INDEX_BYTES) + INDEX_BYTES * m.n_rows_padded,
        bytes_rhs_worst=m.nnz * vb,
        bytes_lhs=2 * vb * m.n_rows,
    )
    return (out if out is not None else y[: m.n_rows]), stats


# -- pJDS ------------------------------------------------------------------------------

def _pjds_rows(m: PjdsMatrix, x, lo, hi, y) -> None:
    rowmax = m.rowmax[lo:hi]
    for j in range(int(rowmax.max(initial=0))):
        active = np.flatnonzero(rowmax > j)
        col_offset = m.col_start[j]
        k = col_offset + lo + active
        y[active] += m.values[k] * x[m.col_idx[k]]


def spmv_pjds(m: PjdsMatrix, x, precision: str = "DP") -> tuple[np.ndarray, SpmvStats]:
    """Multiply in the permuted row basis.

    ``x`` is in the original column numbering (only rows are permuted);
    the result is in permuted row order, use
    ``permute_vector(y, m.permutation, "inverse")`` to map it back.
    """
    x = _check_x(m.n_cols, x)
    y = np.zeros(m.n_rows_padded)
    _pjds_rows(m, x, 0, m.n_rows_padded, y)
    vb = VALUE_BYTES[precision]
    stats = SpmvStats(
        useful_fma=m.nnz,
        padded_fma=0,
        idle_lane_cycles=_idle_lanes(m.rowmax, m.block_rows),
        bytes_matrix=m.nnz * (vb + INDEX_BYTES) + INDEX_BYTES * m.n_rows_padded,
        bytes_rhs_worst=m.nnz * vb,
        bytes_lhs=2 * vb * m.n_rows,
    )
    return y[: m.n_rows], stats


# -- local / nonlocal split --------------------------------------------------------------

def split_columns(m: CsrMatrix, local_cols: range,
                  halo_cols: np.ndarray | None = None) -> tuple[CsrMatrix, CsrMatrix]:
    """Split ``m`` into a local part (columns renumbered from ``local_cols.start``)
    and a nonlocal part whose columns index the halo buffer.

    ``halo_cols[slot]`` is the global column held in buffer slot ``slot`` and
    must be sorted ascending. Without ``halo_cols`` the nonlocal part keeps
    global column numbers.
    """
    if local_cols.step != 1:
        raise ValueError("local_cols must be a contiguous range")
    cols = m.col_idx
    is_local = (cols >= local_cols.start) & (cols < local_cols.stop)
    rows = m.row_indices()

    def _part(mask, new_cols, n_cols):
        counts = np.bincount(rows[mask], minlength=m.n_rows)
        row_ptr = np.zeros(m.n_rows + 1, dtype=np.int64)
        np.cumsum(counts, out=row_ptr[1:])
        return CsrMatrix(m.n_rows, n_cols, row_ptr, new_cols, m.values[mask])

    local = _part(is_local, cols[is_local] - local_cols.start, len(local_cols))
    remote = cols[~is_local]
    if halo_cols is None:
        return local, _part(~is_local, remote, m.n_cols)
    halo_cols = np.asarray(halo_cols, dtype=np.int64)
    slots = np.searchsorted(halo_cols, remote)
    slots_ok = slots < halo_cols.size
    hit = np.zeros(remote.size, dtype=bool)
    hit[slots_ok] = halo_cols[slots[slots_ok]] == remote[slots_ok]
    if not hit.all():
        missing = remote[~hit][0]
        raise UnmappedColumnError(f"nonlocal column {missing} has no halo buffer slot")
    return local, _part(~is_local, slots, halo_cols.size)


def spmv_split(m: CsrMatrix, local_cols: range, x_local, x_nonlocal,
               halo_cols: np.ndarray | None = None) -> np.ndarray:
    """Two-pass spMVM: local columns first, then the nonlocal columns added onto the same result.

    The result vector is written twice. Each row's sum runs over its local
    entries (ascending column) and then its nonlocal entries (ascending
    column), so it matches ``spmv_csr`` bitwise whenever no nonlocal column
    precedes a local one in that row.
    """
    local, nonlocal_ = split_columns(m, local_cols, halo_cols)
    y = spmv_csr(local, x_local)
    spmv_csr(nonlocal_, x_nonlocal, out=y)
    return y


# -- chunk parallel ----------------------------------------------------------------------

def _row_kernel(m):
    if isinstance(m, CsrMatrix):
        return _csr_rows, m.n_rows, m.n_cols, m.n_rows
    if isinstance(m, EllpackRMatrix):
        return _ellpack_r_rows, m.n_rows_padded, m.n_cols, m.n_rows
    if isinstance(m, EllpackMatrix):
        return _ellpack_rows, m.n_rows_padded, m.n_cols, m.n_rows
    if isinstance(m, PjdsMatrix):
        return _pjds_rows, m.n_rows_padded, m.n_cols, m.n_rows
    raise TypeError(f"no kernel for {type(m).__name__}")


def spmv_parallel(m, x, chunks: int = 1, max_workers: int | None = None) -> np.ndarray:
    """Row-chunked parallel spMVM for any format; bitwise equal to the sequential kernel.

    For pJDS the result is in permuted row order, like ``spmv_pjds``.
    """
    if chunks < 1:
        raise ValueError("chunks must be >= 1")
    kernel, n_exec, n_cols, n_rows = _row_kernel(m)
    x = _check_x(n_cols, x)
    y = np.zeros(n_exec)
    bounds = np.linspace(0, n_exec, chunks + 1).astype(np.int64)

    def work(c):
        lo, hi = int(bounds[c]), int(bounds[c + 1])
        if hi > lo:
            kernel(m, x, lo, hi, y[lo:hi])

    if chunks == 1:
        work(0)
    else:
        with ThreadPoolExecutor(max_workers=max_workers or min(chunks, 8)) as pool:
            list(pool.map(work, range(chunks)))
    return y[:n_rows]


def spmv(m, x) -> tuple[np.ndarray, SpmvStats | None]:
    """Dispatch on the matrix type; CSR returns no stats."""
    if isinstance(m, CsrMatrix):
        return spmv_csr(m, x), None
    if isinstance(m, EllpackRMatrix):
        return spmv_ellpack_r(m, x)
    if isinstance(m, EllpackMatrix):
        return spmv_ellpack(m, x)
    if isinstance(m, PjdsMatrix):
        return spmv_pjds(m, x)
    raise TypeError(f"no kernel for {type(m).__name__}")
