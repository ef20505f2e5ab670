"""Padded jagged diagonals (pJDS) and ELLPACK-family sparse formats, spMVM kernels,
a PCIe-aware bandwidth model and a distributed spMVM harness."""

from .formats import (
    EllpackMatrix,
    EllpackRMatrix,
    EmptyRowError,
    FootprintReport,
    PjdsMatrix,
    build_ellpack,
    build_ellpack_r,
    build_pjds,
    footprint,
    permute_vector,
)
from .kernels import (
    DimensionError,
    SpmvStats,
    spmv_csr,
    spmv_ellpack,
    spmv_ellpack_r,
    spmv_parallel,
    spmv_pjds,
    spmv_split,
)
from .matrix import (
    Adversarial,
    Banded,
    Clustered,
    Constant,
    CooMatrix,
    CsrMatrix,
    GeneratorSpec,
    RowLengthHistogram,
    Uniform,
    coo_to_csr,
    csr_to_coo,
    generate,
    histogram,
    load_jgd,
    load_matrix,
    read_matrix_market,
    save_jgd,
    write_matrix_market,
)

__version__ = "0.1.0"
