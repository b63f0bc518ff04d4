"""Grid overlay of two layouts and the resulting package set.

``PackageSet`` follows a source-major convention: package ``(i, j)`` holds
the overlay blocks that process ``i`` (owner under the source layout) must
send to process ``j`` (owner under the destination layout).  Blocks are
always expressed in destination coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ExtentMismatchError
from .layout import BlockRef, Grid, Layout


@dataclass(frozen=True, eq=False)
class OverlayGrid:
    """Union of two grids with per-axis cover maps.

    Covers are kept factored per axis: overlay block ``(i, j)`` is covered
    by block ``(row_cover_a[i], col_cover_a[j])`` of grid A, and likewise
    for B.
    """

    grid: Grid
    row_cover_a: np.ndarray
    col_cover_a: np.ndarray
    row_cover_b: np.ndarray
    col_cover_b: np.ndarray

    @property
    def row_splits(self):
        return self.grid.row_splits

    @property
    def col_splits(self):
        return self.grid.col_splits

    @property
    def shape(self):
        return self.grid.shape

    @property
    def n_blocks(self) -> int:
        return self.grid.n_blocks

    def cover_a(self, i: int, j: int) -> tuple[int, int]:
        return int(self.row_cover_a[i]), int(self.col_cover_a[j])

    def cover_b(self, i: int, j: int) -> tuple[int, int]:
        return int(self.row_cover_b[i]), int(self.col_cover_b[j])


def _cover(splits: np.ndarray, starts: np.ndarray) -> np.ndarray:
    return np.searchsorted(splits, starts, side="right") - 1


def overlay_grids(ga: Grid, gb: Grid) -> OverlayGrid:
    if ga.extent != gb.extent:
        raise ExtentMismatchError(f"grid extents differ: {ga.extent} vs {gb.extent}")
    rows = np.union1d(ga.row_splits, gb.row_splits)
    cols = np.union1d(ga.col_splits, gb.col_splits)
    r0, c0 = rows[:-1], cols[:-1]
    return OverlayGrid(
        Grid(rows, cols),
        _cover(ga.row_splits, r0), _cover(ga.col_splits, c0),
        _cover(gb.row_splits, r0), _cover(gb.col_splits, c0),
    )


@dataclass(frozen=True)
class Package:
    """Blocks travelling from one process to another."""

    blocks: tuple[BlockRef, ...]
    elem_size: int
    transform: bool = False

    @property
    def n_elems(self) -> int:
        return sum(b.n_elems for b in self.blocks)

    @property
    def volume(self) -> int:
        return self.n_elems * self.elem_size

    @property
    def transform_elems(self) -> int:
        return self.n_elems if self.transform else 0

    def __bool__(self):
        return bool(self.blocks)


EMPTY = Package((), 1)


class PackageSet:
    """All packages ``S_ij`` of one redistribution.

    Attributes
    ----------
    n_procs : int
    elem_size : int
    overlay : OverlayGrid
        Overlay of the destination grid with the (possibly transposed)
        source grid.
    src_owner, dst_owner : ndarray
        Sender and receiver of every overlay block.
    transposed : bool
        Payloads come from the transposed source region; an overlay block
        ``b`` is read from ``b.transposed()`` in source coordinates.
    transform : bool
        Whether blocks count as transformed for transform-aware costs.
    volumes : ndarray, shape (n_procs, n_procs)
        ``V(S_ij)`` in bytes.
    """

    def __init__(self, n_procs, elem_size, overlay, src_owner, dst_owner,
                 transposed=False, transform=None):
        self.n_procs = int(n_procs)
        self.elem_size = int(elem_size)
        self.overlay = overlay
        self.src_owner = src_owner
        self.dst_owner = dst_owner
        self.transposed = bool(transposed)
        self.transform = self.transposed if transform is None else bool(transform)
        area = overlay.grid.row_sizes[:, None] * overlay.grid.col_sizes[None, :]
        elems = np.zeros(self.n_procs * self.n_procs, dtype=np.int64)
        np.add.at(elems, (src_owner * self.n_procs + dst_owner).ravel(), area.ravel())
        self.elems = elems.reshape(self.n_procs, self.n_procs)
        self.elems.flags.writeable = False
        self.volumes = self.elems * self.elem_size
        self.volumes.flags.writeable = False

    @property
    def transform_elems(self) -> np.ndarray:
        return self.elems if self.transform else np.zeros_like(self.elems)

    @cached_property
    def index_groups(self) -> dict[tuple[int, int], np.ndarray]:
        """Sparse map ``(i, j) -> flat overlay block indices`` (row-major order)."""
        key = (self.src_owner * self.n_procs + self.dst_owner).ravel()
        order = np.argsort(key, kind="stable")
        bounds = np.flatnonzero(np.diff(key[order])) + 1
        out = {}
        for grp in np.split(order, bounds):
            if len(grp):
                out[divmod(int(key[grp[0]]), self.n_procs)] = grp
        return dict(sorted(out.items()))

    @cached_property
    def packages(self) -> dict[tuple[int, int], list[BlockRef]]:
        """Sparse map ``(i, j) -> blocks``; blocks in (row, col) lexicographic order."""
        rs, cs = self.overlay.row_splits.tolist(), self.overlay.col_splits.tolist()
        ncols = len(cs) - 1
        out = {}
        for pair, grp in self.index_groups.items():
            blocks = []
            for flat in grp.tolist():
                i, j = divmod(flat, ncols)
                blocks.append(BlockRef((rs[i], rs[i + 1]), (cs[j], cs[j + 1])))
            out[pair] = blocks
        return out

    def package(self, i: int, j: int) -> Package:
        blocks = self.packages.get((i, j))
        if not blocks:
            return EMPTY
        return Package(tuple(blocks), self.elem_size, self.transform)

    def pairs(self) -> list[tuple[int, int]]:
        """Nonempty ``(sender, receiver)`` pairs in lexicographic order."""
        return [(int(i), int(j)) for i, j in np.argwhere(self.elems > 0)]

    def volume(self, i: int, j: int) -> int:
        return int(self.volumes[i, j])

    @property
    def total_volume(self) -> int:
        return int(self.volumes.sum())

    @property
    def remote_volume(self) -> int:
        """Off-diagonal volume, i.e. traffic without any relabeling."""
        return self.total_volume - int(np.trace(self.volumes))


def _common_procs(la: Layout, lb: Layout) -> int:
    return max(la.n_procs, lb.n_procs)


def build_package_set(la: Layout, lb: Layout, transform: bool = False) -> PackageSet:
    """Packages for copying B (source, layout ``lb``) into A's layout ``la``.

    Overlay block ``b`` lands in ``S_ij`` with ``i`` the owner of the B block
    covering ``b`` and ``j`` the owner of the A block covering ``b``.
    """
    if la.extent != lb.extent:
        raise ExtentMismatchError(f"extent of A {la.extent} != extent of B {lb.extent}")
    if la.elem_size != lb.elem_size:
        raise ExtentMismatchError("layouts disagree on element size")
    ov = overlay_grids(la.grid, lb.grid)
    src = lb.owners[np.ix_(ov.row_cover_b, ov.col_cover_b)]
    dst = la.owners[np.ix_(ov.row_cover_a, ov.col_cover_a)]
    return PackageSet(_common_procs(la, lb), la.elem_size, ov, src, dst, False, transform)


def transposed_package_set(la: Layout, lb: Layout, transform: bool = True) -> PackageSet:
    """Packages for writing ``B^T`` into A's layout.

    The overlay is taken between A's grid and B's grid transposed; the
    source of overlay block ``(i, j)`` is the owner of B's block
    ``(cover_b(j), cover_b(i))``.
    """
    m, n = lb.extent
    if la.extent != (n, m):
        raise ExtentMismatchError(f"extent of A {la.extent} != transposed extent of B {(n, m)}")
    if la.elem_size != lb.elem_size:
        raise ExtentMismatchError("layouts disagree on element size")
    ov = overlay_grids(la.grid, lb.grid.transposed())
    src = lb.owners.T[np.ix_(ov.row_cover_b, ov.col_cover_b)]
    dst = la.owners[np.ix_(ov.row_cover_a, ov.col_cover_a)]
    return PackageSet(_common_procs(la, lb), la.elem_size, ov, src, dst, True, transform)
