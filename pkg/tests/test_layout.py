import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matshuffle.engine import gather, make_processes, scatter
from matshuffle.errors import LayoutError
from matshuffle.generate import random_layout
from matshuffle.layout import (BlockRef, Grid, Layout, StorageDesc, block_volume,
                               make_block_cyclic, truncate_to_submatrix)
from oracles import element_owners


def test_block_cyclic_one_block_per_process():
    L = make_block_cyclic(4, 4, 2, 2, 2, 2, "row-major")
    assert L.grid.n_blocks == 4
    assert L.owners.tolist() == [[0, 1], [2, 3]]
    assert L.n_procs == 4


def test_block_cyclic_single_process():
    L = make_block_cyclic(4, 4, 2, 2, 1, 1)
    assert L.owners.tolist() == [[0, 0], [0, 0]]


def test_block_cyclic_ragged():
    L = make_block_cyclic(5, 5, 2, 2, 2, 2, "row-major")
    assert L.grid.row_splits.tolist() == [0, 2, 4, 5]
    assert L.grid.col_splits.tolist() == [0, 2, 4, 5]
    # block rows/cols 0,1,2 map to process-grid coords 0,1,0
    assert L.owners.tolist() == [[0, 1, 0], [2, 3, 2], [0, 1, 0]]
    assert L.grid.block(2, 2).shape == (1, 1)
    assert L.owner(2, 2) == 0


def test_block_cyclic_col_major_order():
    L = make_block_cyclic(4, 4, 2, 2, 2, 2, "col-major")
    assert L.owners.tolist() == [[0, 2], [1, 3]]


@pytest.mark.parametrize("args", [(0, 4, 2, 2, 1, 1), (4, 4, 0, 2, 1, 1), (4, 4, 2, 2, 0, 1)])
def test_block_cyclic_rejects_zero(args):
    with pytest.raises(LayoutError):
        make_block_cyclic(*args)


def test_default_storage_is_packed_block_column_major():
    L = make_block_cyclic(4, 6, 2, 2, 1, 1)
    # one process, blocks visited column of blocks by column of blocks
    offs = [[L.storage(i, j).offset for j in range(3)] for i in range(2)]
    assert offs == [[0, 8, 16], [4, 12, 20]]
    assert L.storage(1, 2) == StorageDesc(2, "col-major", 20)
    assert L.local_size(0) == 24


@pytest.mark.parametrize("shape,elem,expected", [((4, 4), 8, 128), ((1, 1), 8, 8), ((3, 5), 16, 240)])
def test_block_volume(shape, elem, expected):
    b = BlockRef((0, shape[0]), (0, shape[1]))
    assert block_volume(b, elem) == expected


def test_grid_invariants():
    with pytest.raises(LayoutError):
        Grid([1, 4], [0, 4])
    with pytest.raises(LayoutError):
        Grid([0, 2, 2, 4], [0, 4])
    with pytest.raises(LayoutError):
        Grid([0], [0, 4])
    with pytest.raises(LayoutError):
        BlockRef((2, 2), (0, 1))


def test_owner_range_checked():
    with pytest.raises(LayoutError):
        Layout(Grid([0, 2], [0, 2]), [[3]], n_procs=2)
    with pytest.raises(LayoutError):
        Layout(Grid([0, 2], [0, 2]), [[0, 0]])


def test_overlapping_storage_rejected():
    grid = Grid([0, 2, 4], [0, 2])
    bad = {(0, 0): StorageDesc(2, "col-major", 0), (1, 0): StorageDesc(2, "col-major", 3)}
    with pytest.raises(LayoutError, match="overlapping"):
        Layout(grid, [[0], [0]], storage=bad)
    # same offsets are fine when the blocks live on different processes
    Layout(grid, [[0], [1]], storage=bad)


def test_leading_dimension_checked():
    with pytest.raises(LayoutError):
        Layout(Grid([0, 3], [0, 2]), [[0]], storage={(0, 0): StorageDesc(2, "col-major", 0)})
    Layout(Grid([0, 3], [0, 2]), [[0]], storage={(0, 0): StorageDesc(2, "row-major", 0)})


def test_truncate_full_range_is_identity():
    L = make_block_cyclic(7, 5, 2, 3, 2, 1)
    assert truncate_to_submatrix(L, (0, 7), (0, 5)) == L


def test_truncate_rows():
    L = make_block_cyclic(4, 4, 2, 2, 2, 2)
    T = truncate_to_submatrix(L, (1, 3), (0, 4))
    assert T.grid.row_splits.tolist() == [0, 1, 2]
    assert T.grid.col_splits.tolist() == [0, 2, 4]
    assert T.owners.tolist() == [[0, 1], [2, 3]]


def test_truncate_inside_one_block():
    L = make_block_cyclic(6, 6, 3, 3, 2, 2)
    T = truncate_to_submatrix(L, (4, 6), (1, 2))
    assert T.grid.shape == (1, 1)
    assert T.owner(0, 0) == L.owner(1, 0) == 2


def test_truncate_rejects_empty():
    L = make_block_cyclic(4, 4, 2, 2, 1, 1)
    with pytest.raises(LayoutError):
        truncate_to_submatrix(L, (2, 2), (0, 4))
    with pytest.raises(LayoutError):
        truncate_to_submatrix(L, (0, 5), (0, 4))


def test_truncated_layout_addresses_parent_storage():
    rng = np.random.default_rng(5)
    L = random_layout(rng, 9, 7, 3)
    M = np.arange(63).reshape(9, 7)
    procs = make_processes(3)
    scatter(L, M, procs, "X")
    T = truncate_to_submatrix(L, (2, 8), (1, 6))
    np.testing.assert_array_equal(gather(T, procs, "X"), M[2:8, 1:6])


def test_relabel_moves_blocks():
    L = make_block_cyclic(4, 4, 2, 2, 2, 2)
    R = L.relabel([3, 2, 1, 0])
    assert R.owners.tolist() == [[3, 2], [1, 0]]
    with pytest.raises(LayoutError):
        L.relabel([0, 0, 1, 2])


layout_params = st.tuples(st.integers(1, 20), st.integers(1, 20), st.integers(1, 6),
                          st.integers(0, 2**32 - 1))


@settings(max_examples=60, deadline=None)
@given(layout_params)
def test_blocks_tile_matrix_exactly_once(params):
    m, n, p, seed = params
    L = random_layout(np.random.default_rng(seed), m, n, p)
    cover = np.zeros((m, n), dtype=int)
    for _, b in L.grid.blocks():
        cover[b.row_range[0]:b.row_range[1], b.col_range[0]:b.col_range[1]] += 1
    assert (cover == 1).all()
    assert sum(block_volume(b, L.elem_size) for _, b in L.grid.blocks()) == m * n * L.elem_size
    assert (element_owners(L) >= 0).all()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(1, 8), st.integers(1, 8))
def test_single_process_grid_has_single_owner(m, n, mb, nb):
    L = make_block_cyclic(m, n, mb, nb, 1, 1)
    assert set(L.owners.ravel().tolist()) == {0}


@settings(max_examples=40, deadline=None)
@given(layout_params)
def test_scatter_gather_roundtrip(params):
    m, n, p, seed = params
    rng = np.random.default_rng(seed)
    L = random_layout(rng, m, n, p)
    M = rng.integers(-100, 100, size=(m, n))
    procs = make_processes(p)
    scatter(L, M, procs, "X")
    np.testing.assert_array_equal(gather(L, procs, "X"), M)
