"""Distributed matrix layouts.

A layout is a grid (sorted row and column splits), an owner for every grid
block and a storage descriptor telling where each block lives inside its
owner's local buffer.  Layouts are immutable once built.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import LayoutError

ROW_MAJOR = "row-major"
COL_MAJOR = "col-major"
ORDERINGS = (ROW_MAJOR, COL_MAJOR)


def _normalize_ordering(value: str) -> str:
    v = str(value).lower().replace("_", "-")
    if v in ("row", "r", ROW_MAJOR):
        return ROW_MAJOR
    if v in ("col", "c", "column", "column-major", COL_MAJOR):
        return COL_MAJOR
    raise LayoutError(f"unknown ordering {value!r}")


@dataclass(frozen=True, order=True)
class BlockRef:
    """Rectangular piece of the global matrix, half-open on both axes."""

    row_range: tuple[int, int]
    col_range: tuple[int, int]

    def __post_init__(self):
        (r0, r1), (c0, c1) = self.row_range, self.col_range
        if r0 < 0 or c0 < 0 or r1 <= r0 or c1 <= c0:
            raise LayoutError(f"empty or negative block {self.row_range} x {self.col_range}")

    @property
    def rows(self) -> int:
        return self.row_range[1] - self.row_range[0]

    @property
    def cols(self) -> int:
        return self.col_range[1] - self.col_range[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def n_elems(self) -> int:
        return self.rows * self.cols

    def transposed(self) -> BlockRef:
        return BlockRef(self.col_range, self.row_range)

    def contains(self, other: BlockRef) -> bool:
        return (self.row_range[0] <= other.row_range[0] and other.row_range[1] <= self.row_range[1]
                and self.col_range[0] <= other.col_range[0] and other.col_range[1] <= self.col_range[1])


def block_volume(b: BlockRef, elem_size: int) -> int:
    """Size of ``b`` in bytes."""
    return b.rows * b.cols * int(elem_size)


@dataclass(frozen=True)
class StorageDesc:
    """Placement of one block inside a process-local element buffer.

    ``leading_dimension`` is the stride (in elements) between consecutive
    columns for col-major storage, or consecutive rows for row-major.
    """

    leading_dimension: int
    ordering: str = COL_MAJOR
    offset: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ordering", _normalize_ordering(self.ordering))
        if self.offset < 0:
            raise LayoutError("negative storage offset")

    def check(self, rows: int, cols: int) -> None:
        inner = cols if self.ordering == ROW_MAJOR else rows
        if self.leading_dimension < inner:
            raise LayoutError(
                f"leading dimension {self.leading_dimension} < contiguous extent {inner}")

    def end(self, rows: int, cols: int) -> int:
        """One past the last buffer slot touched by a ``rows x cols`` block."""
        if self.ordering == ROW_MAJOR:
            return self.offset + self.leading_dimension * (rows - 1) + cols
        return self.offset + self.leading_dimension * (cols - 1) + rows


def _as_splits(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64).ravel()
    if arr.size < 2:
        raise LayoutError(f"{name} needs at least two entries")
    if arr[0] != 0:
        raise LayoutError(f"{name} must start at 0")
    if np.any(np.diff(arr) <= 0):
        raise LayoutError(f"{name} must be strictly increasing")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


class Grid:
    """Row and column splits partitioning an ``m x n`` matrix into blocks."""

    __slots__ = ("row_splits", "col_splits")

    def __init__(self, row_splits: Sequence[int], col_splits: Sequence[int]):
        self.row_splits = _as_splits(row_splits, "row_splits")
        self.col_splits = _as_splits(col_splits, "col_splits")

    @property
    def n_rows(self) -> int:
        return int(self.row_splits[-1])

    @property
    def n_cols(self) -> int:
        return int(self.col_splits[-1])

    @property
    def extent(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def shape(self) -> tuple[int, int]:
        """Number of block rows and block columns."""
        return len(self.row_splits) - 1, len(self.col_splits) - 1

    @property
    def n_blocks(self) -> int:
        r, c = self.shape
        return r * c

    @property
    def row_sizes(self) -> np.ndarray:
        return np.diff(self.row_splits)

    @property
    def col_sizes(self) -> np.ndarray:
        return np.diff(self.col_splits)

    def block(self, i: int, j: int) -> BlockRef:
        rs, cs = self.row_splits, self.col_splits
        return BlockRef((int(rs[i]), int(rs[i + 1])), (int(cs[j]), int(cs[j + 1])))

    def blocks(self):
        nbr, nbc = self.shape
        for i in range(nbr):
            for j in range(nbc):
                yield (i, j), self.block(i, j)

    def transposed(self) -> Grid:
        return Grid(self.col_splits, self.row_splits)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (np.array_equal(self.row_splits, other.row_splits)
                and np.array_equal(self.col_splits, other.col_splits))

    def __hash__(self):
        return hash((self.row_splits.tobytes(), self.col_splits.tobytes()))

    def __repr__(self):
        return f"Grid(rows={self.row_splits.tolist()}, cols={self.col_splits.tolist()})"


def _default_storage(grid: Grid, owners: np.ndarray):
    # Blocks of each process packed back to back, block-column-major,
    # col-major inside each block with ld = block rows.
    h = grid.row_sizes[:, None]
    w = grid.col_sizes[None, :]
    sizes = np.broadcast_to(h * w, owners.shape).ravel(order="F")
    own = owners.ravel(order="F")
    order = np.argsort(own, kind="stable")
    s_sorted = sizes[order]
    excl = np.cumsum(s_sorted) - s_sorted
    own_sorted = own[order]
    first = np.searchsorted(own_sorted, own_sorted, side="left")
    offsets = np.empty_like(excl)
    offsets[order] = excl - excl[first]
    offsets = offsets.reshape(owners.shape, order="F")
    ld = np.broadcast_to(h, owners.shape).copy()
    row_major = np.zeros(owners.shape, dtype=bool)
    return ld, offsets, row_major


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


class Layout:
    """Grid + owners + per-block storage.

    Parameters
    ----------
    grid : Grid
    owners : array_like of int, shape ``grid.shape``
        Owning process of each grid block.
    n_procs : int, optional
        Process count ``P``; defaults to ``max(owners) + 1``.  Processes
        owning nothing are allowed.
    elem_size : int
        Bytes per element.
    storage : mapping or nested sequence of StorageDesc, optional
        Explicit placement of each block.  When omitted, each process packs
        its blocks contiguously in block-column-major order.
    """

    def __init__(self, grid: Grid, owners, n_procs: int | None = None, elem_size: int = 8,
                 storage=None):
        own = np.asarray(owners, dtype=np.int64)
        if own.shape != grid.shape:
            raise LayoutError(f"owners shape {own.shape} does not match grid {grid.shape}")
        if own.size and own.min() < 0:
            raise LayoutError("negative owner index")
        if n_procs is None:
            n_procs = int(own.max()) + 1
        if n_procs <= 0:
            raise LayoutError("n_procs must be positive")
        if own.max() >= n_procs:
            raise LayoutError(f"owner {int(own.max())} out of range for {n_procs} processes")
        if elem_size <= 0:
            raise LayoutError("elem_size must be positive")
        self._grid = grid
        self._owners = _readonly(own)
        self._n_procs = int(n_procs)
        self._elem_size = int(elem_size)
        if storage is None:
            ld, off, rm = _default_storage(grid, own)
        else:
            ld, off, rm = self._storage_arrays(storage)
        self._ld, self._offset, self._row_major = _readonly(ld), _readonly(off), _readonly(rm)
        self._local_sizes = None

    def _storage_arrays(self, storage):
        nbr, nbc = self._grid.shape
        ld = np.zeros((nbr, nbc), dtype=np.int64)
        off = np.zeros((nbr, nbc), dtype=np.int64)
        rm = np.zeros((nbr, nbc), dtype=bool)
        for (i, j), b in self._grid.blocks():
            desc = storage[i, j] if isinstance(storage, Mapping) else storage[i][j]
            if not isinstance(desc, StorageDesc):
                desc = StorageDesc(**desc)
            desc.check(b.rows, b.cols)
            ld[i, j], off[i, j] = desc.leading_dimension, desc.offset
            rm[i, j] = desc.ordering == ROW_MAJOR
        self._check_disjoint(ld, off, rm)
        return ld, off, rm

    def _check_disjoint(self, ld, off, rm):
        rows, cols = self._grid.row_sizes, self._grid.col_sizes
        for p in range(self._n_procs):
            idx = np.argwhere(self._owners == p)
            if len(idx) == 0:
                continue
            ends = []
            for i, j in idx:
                d = StorageDesc(int(ld[i, j]), ROW_MAJOR if rm[i, j] else COL_MAJOR, int(off[i, j]))
                ends.append(d.end(int(rows[i]), int(cols[j])))
            occ = np.zeros(max(ends), dtype=np.int64)
            for i, j in idx:
                v = _strided(occ, int(off[i, j]), int(rows[i]), int(cols[j]), int(ld[i, j]), bool(rm[i, j]))
                v += 1
            if occ.max() > 1:
                raise LayoutError(f"overlapping block storage on process {p}")

    grid = property(lambda self: self._grid)
    owners = property(lambda self: self._owners)
    n_procs = property(lambda self: self._n_procs)
    elem_size = property(lambda self: self._elem_size)

    @property
    def extent(self) -> tuple[int, int]:
        return self._grid.extent

    @property
    def total_volume(self) -> int:
        m, n = self.extent
        return m * n * self._elem_size

    def owner(self, i: int, j: int) -> int:
        return int(self._owners[i, j])

    def storage(self, i: int, j: int) -> StorageDesc:
        order = ROW_MAJOR if self._row_major[i, j] else COL_MAJOR
        return StorageDesc(int(self._ld[i, j]), order, int(self._offset[i, j]))

    @property
    def storage_arrays(self):
        """``(leading_dimension, offset, is_row_major)`` arrays over the grid."""
        return self._ld, self._offset, self._row_major

    def blocks_of(self, rank: int) -> list[tuple[int, int]]:
        return [tuple(map(int, ij)) for ij in np.argwhere(self._owners == rank)]

    def local_size(self, rank: int) -> int:
        """Element count of the buffer ``rank`` needs to hold its blocks."""
        if self._local_sizes is None:
            h = self._grid.row_sizes[:, None]
            w = self._grid.col_sizes[None, :]
            inner = np.where(self._row_major, w, h)
            outer = np.where(self._row_major, h, w)
            end = self._offset + self._ld * (outer - 1) + inner
            sizes = np.zeros(self._n_procs, dtype=np.int64)
            np.maximum.at(sizes, self._owners.ravel(), end.ravel())
            self._local_sizes = sizes
        return int(self._local_sizes[rank])

    def with_n_procs(self, n_procs: int) -> Layout:
        """Same layout on a larger process set (extra processes own nothing)."""
        if n_procs == self._n_procs:
            return self
        if n_procs < self._n_procs:
            raise LayoutError("cannot shrink the process set")
        return self._replace(n_procs=n_procs)

    def relabel(self, sigma: Sequence[int]) -> Layout:
        """Move everything process ``j`` owns to process ``sigma[j]``."""
        s = np.asarray(sigma, dtype=np.int64)
        if s.shape != (self._n_procs,) or not np.array_equal(np.sort(s), np.arange(self._n_procs)):
            raise LayoutError("sigma is not a permutation of the process indices")
        return self._replace(owners=s[self._owners])

    def _replace(self, owners=None, n_procs=None) -> Layout:
        new = object.__new__(Layout)
        new._grid = self._grid
        new._owners = _readonly(np.array(self._owners if owners is None else owners))
        new._n_procs = self._n_procs if n_procs is None else int(n_procs)
        new._elem_size = self._elem_size
        new._ld, new._offset, new._row_major = self._ld, self._offset, self._row_major
        new._local_sizes = None
        return new

    def __eq__(self, other):
        if not isinstance(other, Layout):
            return NotImplemented
        return (self._grid == other._grid and self._n_procs == other._n_procs
                and self._elem_size == other._elem_size
                and np.array_equal(self._owners, other._owners)
                and np.array_equal(self._ld, other._ld)
                and np.array_equal(self._offset, other._offset)
                and np.array_equal(self._row_major, other._row_major))

    __hash__ = None

    def __repr__(self):
        m, n = self.extent
        return (f"Layout({m}x{n}, blocks={self._grid.shape}, n_procs={self._n_procs}, "
                f"elem_size={self._elem_size})")


def _strided(buf: np.ndarray, offset: int, rows: int, cols: int, ld: int, row_major: bool):
    """Writable ``rows x cols`` view of a block stored in ``buf``."""
    item = buf.itemsize
    strides = (ld * item, item) if row_major else (item, ld * item)
    return np.lib.stride_tricks.as_strided(buf[offset:], shape=(rows, cols), strides=strides)


def block_view(buf: np.ndarray, layout: Layout, i: int, j: int) -> np.ndarray:
    """View of grid block ``(i, j)`` inside its owner's local buffer."""
    b = layout.grid.block(i, j)
    ld, off, rm = layout.storage_arrays
    if len(buf) < layout.storage(i, j).end(b.rows, b.cols):
        raise LayoutError("local buffer too small for its layout")
    return _strided(buf, int(off[i, j]), b.rows, b.cols, int(ld[i, j]), bool(rm[i, j]))


def _cyclic_splits(extent: int, block: int) -> np.ndarray:
    s = np.arange(0, extent, block, dtype=np.int64)
    return np.append(s, extent)


def make_block_cyclic(m: int, n: int, mb: int, nb: int, p_rows: int, p_cols: int,
                      proc_order: str = ROW_MAJOR, elem_size: int = 8) -> Layout:
    """2D block-cyclic layout on a ``p_rows x p_cols`` process grid.

    Block ``(i, j)`` goes to process-grid coordinate ``(i % p_rows, j % p_cols)``,
    linearized in ``proc_order``.  The last block along each axis may be ragged.
    """
    if min(m, n, mb, nb) <= 0:
        raise LayoutError("matrix and block dimensions must be positive")
    if p_rows <= 0 or p_cols <= 0:
        raise LayoutError("process grid must be non-empty")
    order = _normalize_ordering(proc_order)
    grid = Grid(_cyclic_splits(m, mb), _cyclic_splits(n, nb))
    nbr, nbc = grid.shape
    pr = (np.arange(nbr) % p_rows)[:, None]
    pc = (np.arange(nbc) % p_cols)[None, :]
    owners = pr * p_cols + pc if order == ROW_MAJOR else pr + pc * p_rows
    return Layout(grid, owners, n_procs=p_rows * p_cols, elem_size=elem_size)


def _cut(splits: np.ndarray, lo: int, hi: int):
    inner = splits[(splits > lo) & (splits < hi)]
    starts = np.concatenate(([lo], inner))
    cover = np.searchsorted(splits, starts, side="right") - 1
    return np.concatenate((starts, [hi])) - lo, cover, starts - splits[cover]


def truncate_to_submatrix(layout: Layout, row_range: tuple[int, int],
                          col_range: tuple[int, int]) -> Layout:
    """Restrict ``layout`` to a sub-matrix, re-indexed to start at (0, 0).

    Each surviving piece keeps its owner and points into the same local
    storage as the block it was cut from.
    """
    m, n = layout.extent
    (r0, r1), (c0, c1) = row_range, col_range
    if not (0 <= r0 < r1 <= m and 0 <= c0 < c1 <= n):
        raise LayoutError(f"sub-range {row_range} x {col_range} empty or outside {m}x{n}")
    rsplits, rcov, rshift = _cut(layout.grid.row_splits, r0, r1)
    csplits, ccov, cshift = _cut(layout.grid.col_splits, c0, c1)
    ld, off, rm = (a[np.ix_(rcov, ccov)] for a in layout.storage_arrays)
    dr, dc = rshift[:, None], cshift[None, :]
    new_off = off + np.where(rm, dr * ld + dc, dr + dc * ld)
    new = object.__new__(Layout)
    new._grid = Grid(rsplits, csplits)
    new._owners = _readonly(layout.owners[np.ix_(rcov, ccov)])
    new._n_procs = layout.n_procs
    new._elem_size = layout.elem_size
    new._ld, new._offset, new._row_major = _readonly(ld), _readonly(new_off), _readonly(rm)
    new._local_sizes = None
    return new
