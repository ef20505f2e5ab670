import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_spmv, idle_lanes_by_hand, matrix_with_lengths, rel_inf_err, sequential_row_sums
from pjds.formats import build_ellpack, build_ellpack_r, build_pjds, permute_vector
from pjds.kernels import (
    DimensionError,
    SpmvStats,
    UnmappedColumnError,
    spmv,
    spmv_csr,
    spmv_ellpack,
    spmv_ellpack_r,
    spmv_parallel,
    spmv_pjds,
    spmv_split,
    split_columns,
)
from pjds.matrix import Adversarial, CsrMatrix, GeneratorSpec, Uniform, generate


def rows_of(m):
    return [list(zip(m.col_idx[m.row_ptr[i]:m.row_ptr[i + 1]].tolist(),
                     m.values[m.row_ptr[i]:m.row_ptr[i + 1]].tolist()))
            for i in range(m.n_rows)]


def all_formats(m, b):
    x = np.random.default_rng(1).uniform(-1, 1, m.n_cols)
    p = build_pjds(m, b)
    y_pjds, _ = spmv_pjds(p, x)
    return x, {
        "csr": spmv_csr(m, x),
        "ellpack": spmv_ellpack(build_ellpack(m, b), x)[0],
        "ellpack_r": spmv_ellpack_r(build_ellpack_r(m, b), x)[0],
        "pjds": permute_vector(y_pjds, p.permutation, "inverse"),
    }


def test_identity():
    m = CsrMatrix(3, 3, [0, 1, 2, 3], [0, 1, 2], [1.0, 1.0, 1.0])
    x = np.array([1.5, -2.0, 3.25])
    assert spmv_csr(m, x).tolist() == [1.5, -2.0, 3.25]
    x_rand, ys = all_formats(m, 2)
    for y in ys.values():
        assert np.array_equal(y, x_rand)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 10), min_size=1, max_size=50), st.integers(1, 8), st.integers(0, 999))
def test_kernels_agree_with_left_to_right_sums(lengths, b, seed):
    m = matrix_with_lengths(lengths, seed=seed)
    x, ys = all_formats(m, b)
    ref = sequential_row_sums(rows_of(m), x)
    for name, y in ys.items():
        assert np.array_equal(y, ref), name


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 10), min_size=1, max_size=50), st.integers(0, 999))
def test_kernels_close_to_dense_oracle(lengths, seed):
    m = matrix_with_lengths(lengths, seed=seed)
    x, ys = all_formats(m, 4)
    ref = dense_spmv(m, x)
    for y in ys.values():
        assert rel_inf_err(y, ref) <= 1e-13


def test_adversarial_idle_lanes_and_padding():
    n = 8
    m = generate(GeneratorSpec(n, Adversarial()))
    x = np.ones(n)
    _, s_e = spmv_ellpack(build_ellpack(m, 4), x)
    _, s_r = spmv_ellpack_r(build_ellpack_r(m, 4), x)
    _, s_p = spmv_pjds(build_pjds(m, 4), x)
    assert s_e.padded_fma == n * n - (2 * n - 1)
    assert s_e.idle_lane_cycles == 0
    assert s_r.padded_fma == s_p.padded_fma == 0
    assert s_r.idle_lane_cycles == s_p.idle_lane_cycles == 21
    assert s_e.useful_fma == s_r.useful_fma == s_p.useful_fma == 2 * n - 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 10), min_size=1, max_size=60), st.integers(1, 8))
def test_stats_match_hand_counts(lengths, b):
    m = matrix_with_lengths(lengths)
    x = np.ones(m.n_cols)
    e = build_ellpack(m, b)
    p = build_pjds(m, b)
    _, s_e = spmv_ellpack(e, x)
    _, s_r = spmv_ellpack_r(build_ellpack_r(m, b), x)
    _, s_p = spmv_pjds(p, x)
    assert s_e.padded_fma == e.stored_entries - m.nnz
    assert s_r.idle_lane_cycles == idle_lanes_by_hand(lengths, b)
    # inside a pJDS block the idle lanes are exactly the padding slots
    assert s_p.idle_lane_cycles == p.stored_entries - m.nnz
    assert s_p.idle_lane_cycles <= s_r.idle_lane_cycles
    assert s_p.bytes_lhs == s_r.bytes_lhs == 16 * len(lengths)
    assert s_e.bytes_matrix == 12 * e.stored_entries


def test_stats_add():
    a = SpmvStats(1, 2, 3, 4, 5, 6)
    assert a + a == SpmvStats(2, 4, 6, 8, 10, 12)


def test_dimension_errors():
    m = matrix_with_lengths([1, 2])
    with pytest.raises(DimensionError):
        spmv_csr(m, np.ones(5))
    with pytest.raises(DimensionError):
        spmv_pjds(build_pjds(m, 2), np.ones((2, 1)))
    with pytest.raises(DimensionError):
        spmv_csr(m, np.ones(2), out=np.zeros(3))


def test_ellpack_r_accumulates_into_out():
    m = matrix_with_lengths([2, 1, 3])
    x = np.arange(3.0)
    out = np.array([1.0, 2.0, 3.0])
    y, _ = spmv_ellpack_r(build_ellpack_r(m, 2), x, out=out)
    assert y is out
    want = np.array([1.0, 2.0, 3.0])
    for i, row in enumerate(rows_of(m)):
        for c, v in row:
            want[i] += v * x[c]
    assert np.array_equal(out, want)


@pytest.mark.parametrize("chunks", [1, 2, 3, 7, 16])
def test_parallel_is_bitwise_sequential(chunks):
    m = generate(GeneratorSpec(300, Uniform(1, 30), seed=9))
    x = np.random.default_rng(0).uniform(-1, 1, 300)
    e, r, p = build_ellpack(m, 32), build_ellpack_r(m, 32), build_pjds(m, 32)
    assert np.array_equal(spmv_parallel(m, x, chunks), spmv_csr(m, x))
    assert np.array_equal(spmv_parallel(e, x, chunks), spmv_ellpack(e, x)[0])
    assert np.array_equal(spmv_parallel(r, x, chunks), spmv_ellpack_r(r, x)[0])
    assert np.array_equal(spmv_parallel(p, x, chunks), spmv_pjds(p, x)[0])


def test_dispatch():
    m = matrix_with_lengths([1, 2])
    x = np.ones(2)
    assert spmv(m, x)[1] is None
    assert isinstance(spmv(build_pjds(m, 2), x)[1], SpmvStats)
    with pytest.raises(TypeError):
        spmv_parallel("nope", x)


def test_split_local_columns_only_equals_csr():
    m = generate(GeneratorSpec(20, Uniform(1, 5), seed=2))
    x = np.random.default_rng(3).uniform(size=20)
    y = spmv_split(m, range(0, 20), x, np.zeros(20))
    assert np.array_equal(y, spmv_csr(m, x))


def test_split_orders_local_before_nonlocal():
    # row 0: columns 0 (nonlocal), 2 and 3 (local)
    m = CsrMatrix(1, 4, [0, 3], [0, 2, 3], [1.0, 1e16, -1e16])
    x = np.ones(4)
    y = spmv_split(m, range(2, 4), x[2:], x)
    assert y[0] == 1.0
    assert spmv_csr(m, x)[0] == 0.0


def test_split_columns_with_halo_slots():
    m = CsrMatrix(2, 6, [0, 3, 5], [0, 3, 5, 2, 4], [1.0, 2.0, 3.0, 4.0, 5.0])
    local, remote = split_columns(m, range(2, 4), np.array([0, 4, 5]))
    assert local.col_idx.tolist() == [1, 0]
    assert local.row_ptr.tolist() == [0, 1, 2]
    assert remote.col_idx.tolist() == [0, 2, 1]
    assert remote.n_cols == 3
    with pytest.raises(UnmappedColumnError, match="column 5"):
        split_columns(m, range(2, 4), np.array([0, 4]))


def test_split_with_halo_buffer_matches_oracle():
    m = generate(GeneratorSpec(12, Uniform(2, 6), seed=4))
    x = np.random.default_rng(5).uniform(-1, 1, 12)
    rr = range(4, 8)
    halo = np.array(sorted(set(m.col_idx.tolist()) - set(rr)))
    y = spmv_split(m, rr, x[rr.start:rr.stop], x[halo], halo)
    ordered = [[(c, v) for c, v in row if c in rr] + [(c, v) for c, v in row if c not in rr]
               for row in rows_of(m)]
    assert np.array_equal(y, sequential_row_sums(ordered, x))
