import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import matrix_with_lengths, pjds_storage_by_hand
from pjds.formats import (
    EmptyRowError,
    build_ellpack,
    build_ellpack_r,
    build_pjds,
    csr_min_bytes,
    footprint,
    permute_vector,
)
from pjds.matrix import Adversarial, Constant, GeneratorSpec, csr_to_coo, generate

lengths_st = st.lists(st.integers(1, 12), min_size=1, max_size=70)


def entry_set(fmt):
    r, c, v = fmt.entries()
    return sorted(zip(r.tolist(), c.tolist(), v.tolist()))


def test_ellpack_small_example():
    e = build_ellpack(matrix_with_lengths([2, 3, 1, 3, 2, 1]), warp_size=2)
    assert (e.width, e.n_rows_padded, e.stored_entries) == (3, 6, 18)
    assert e.values.shape == (3, 6)


def test_ellpack_pad_slots_are_zero_and_column_zero():
    e = build_ellpack(matrix_with_lengths([1, 3, 2]), warp_size=4)
    mask = np.zeros_like(e.values, dtype=bool)
    for i, L in enumerate([1, 3, 2]):
        mask[:L, i] = True
    assert np.all(e.values[~mask] == 0.0)
    assert np.all(e.col_idx[~mask] == 0)


def test_ellpack_is_column_major():
    m = matrix_with_lengths([2, 1, 2])
    e = build_ellpack(m, warp_size=1)
    # slot j of row i lives at values[j, i]
    assert e.values[1, 2] == m.values[m.row_ptr[2] + 1]
    assert e.values.flags.c_contiguous and e.values.shape == (2, 3)


def test_ellpack_r_rowmax_and_aux():
    e = build_ellpack_r(matrix_with_lengths([2, 3, 1]), warp_size=4)
    assert e.rowmax.tolist() == [2, 3, 1, 0]
    assert e.aux_bytes() == 16


def test_pjds_small_example():
    p = build_pjds(matrix_with_lengths([1, 3, 2, 3, 2, 1]), block_rows=2)
    assert p.permutation.tolist() == [1, 3, 2, 4, 0, 5]
    assert p.block_max.tolist() == [3, 2, 1]
    assert p.stored_entries == 12
    assert p.col_start.tolist() == [0, 6, 10, 12]
    assert p.rowmax.tolist() == [3, 3, 2, 2, 1, 1]


def test_pjds_pads_row_count_with_virtual_rows():
    p = build_pjds(matrix_with_lengths([4, 1, 2, 2, 3]), block_rows=2)
    assert p.n_rows_padded == 6
    assert p.rowmax.tolist() == [4, 3, 2, 2, 1, 0]
    assert p.block_max.tolist() == [4, 2, 1]
    assert p.stored_entries == 2 * (4 + 2 + 1)


def test_pjds_stable_sort_keeps_ties_in_order():
    p = build_pjds(generate(GeneratorSpec(9, Constant(2))), block_rows=4)
    assert p.permutation.tolist() == list(range(9))


@pytest.mark.parametrize("n,b", [(1024, 32), (64, 8), (100, 32)])
def test_adversarial_storage_bounds(n, b):
    m = generate(GeneratorSpec(n, Adversarial()))
    p = build_pjds(m, b)
    e = build_ellpack(m, b)
    assert p.stored_entries == pjds_storage_by_hand(m.row_lengths().tolist(), b)
    if n % b == 0:
        assert p.stored_entries == (b + 1) * n - b
        assert e.stored_entries == n * n


def test_adversarial_footprint_reduction():
    m = generate(GeneratorSpec(1024, Adversarial()))
    f = footprint(build_pjds(m, 32))
    assert f.data_reduction_vs_ellpack == pytest.approx(1 - 33760 / 1024**2, abs=1e-12)
    assert round(f.data_reduction_vs_ellpack, 4) == 0.9678


def test_empty_rows_rejected():
    m = matrix_with_lengths([2, 0, 1])
    for build in (build_ellpack, build_ellpack_r, build_pjds):
        with pytest.raises(EmptyRowError, match="row 1"):
            build(m)
    assert build_ellpack_r(m, 2, allow_empty_rows=True).rowmax.tolist() == [2, 0, 1, 0]


@pytest.mark.parametrize("b", [0, -3])
def test_bad_block_size(b):
    with pytest.raises(ValueError):
        build_pjds(matrix_with_lengths([1]), b)


@settings(max_examples=60, deadline=None)
@given(lengths_st, st.integers(1, 9), st.integers(0, 1000))
def test_formats_preserve_entries(lengths, b, seed):
    m = matrix_with_lengths(lengths, seed=seed)
    want = sorted(csr_to_coo(m).entries)
    for fmt in (build_ellpack(m, b), build_ellpack_r(m, b), build_pjds(m, b)):
        assert entry_set(fmt) == want
        assert fmt.nnz == m.nnz


@settings(max_examples=60, deadline=None)
@given(lengths_st, st.integers(1, 9))
def test_pjds_structure(lengths, b):
    m = matrix_with_lengths(lengths)
    p = build_pjds(m, b)
    n_pad = p.n_rows_padded
    assert n_pad % b == 0 and n_pad - b < len(lengths) <= n_pad
    assert sorted(p.permutation.tolist()) == list(range(len(lengths)))
    # sorted descending, ties by original index
    keys = [(-lengths[i], i) for i in p.permutation]
    assert keys == sorted(keys)
    assert p.stored_entries == pjds_storage_by_hand(lengths, b)
    # each jagged column covers exactly the rows of blocks whose maximum exceeds j
    for j in range(p.width):
        height = b * int(np.sum(p.block_max > j))
        assert p.col_start[j + 1] - p.col_start[j] == height
    assert np.all(np.diff(p.column_heights()) <= 0)
    assert np.all(np.diff(p.block_max) <= 0)


@settings(max_examples=60, deadline=None)
@given(lengths_st, st.integers(1, 9))
def test_storage_ordering(lengths, b):
    m = matrix_with_lengths(lengths)
    p = build_pjds(m, b)
    e = build_ellpack(m, b)
    assert m.nnz <= p.stored_entries <= p.ellpack_stored_entries() == e.stored_entries
    if len(set(lengths)) == 1 and len(lengths) % b == 0:
        assert p.stored_entries == m.nnz


@pytest.mark.parametrize("k", [1, 7, 15, 144])
@pytest.mark.parametrize("b", [1, 4, 32])
def test_constant_rows_have_no_overhead(k, b):
    m = generate(GeneratorSpec(b * 8, Constant(k), n_cols=max(k, 64)))
    for fmt in (build_ellpack(m, b), build_pjds(m, b)):
        assert footprint(fmt).padding_overhead_fraction == 0.0


def test_footprint_fields():
    m = matrix_with_lengths([3, 1, 2, 2])
    f = footprint(build_pjds(m, 2), "SP")
    assert f.stored_entries == 2 * 3 + 2 * 2
    assert f.bytes_values == 4 * f.stored_entries
    assert f.bytes_indices == 4 * f.stored_entries
    assert f.bytes_aux == 4 * (3 + 1 + 4)
    assert f.padding_overhead_fraction == 10 / 8 - 1
    assert "format=pJDS" in f.to_text()
    with pytest.raises(ValueError):
        footprint(build_pjds(m, 2), "HP")


def test_csr_min_bytes():
    m = matrix_with_lengths([3, 1, 2, 2])
    assert csr_min_bytes(m) == 12 * 8 + 4 * 5
    assert csr_min_bytes(m, "SP") == 8 * 8 + 4 * 5


def test_permute_vector_examples():
    v = np.array([10.0, 20.0, 30.0])
    p = np.array([2, 0, 1])
    assert permute_vector(v, p).tolist() == [30.0, 10.0, 20.0]
    assert permute_vector(v, p, "inverse").tolist() == [20.0, 30.0, 10.0]
    with pytest.raises(ValueError):
        permute_vector(v, p[:2])
    with pytest.raises(ValueError):
        permute_vector(v, p, "sideways")


@given(st.permutations(list(range(12))))
def test_permute_vector_round_trip(perm):
    p = np.array(perm)
    v = np.arange(12.0) * 1.5
    assert np.array_equal(permute_vector(permute_vector(v, p), p, "inverse"), v)
    assert np.array_equal(permute_vector(permute_vector(v, p, "inverse"), p), v)
