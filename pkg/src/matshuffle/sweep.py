"""Communication-volume sweep between two block-cyclic layouts.

Volumes come from factored per-axis covers, so no overlay block and no
owner matrix is ever materialized: along each axis the overlay segments
are binned by (source grid coordinate, destination grid coordinate), and
the per-process-pair volume is the outer product of the two axis
histograms.  This stays cheap for 10^5 x 10^5 matrices with 1x1 blocks.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .copr import solve_lap
from .cost import CommGraph, CostModel, gain_matrix
from .layout import ROW_MAJOR, _normalize_ordering


@dataclass(frozen=True)
class CyclicSpec:
    """Square-block block-cyclic layout description."""

    block: int
    p_rows: int
    p_cols: int
    proc_order: str = ROW_MAJOR

    def rank(self, pr: np.ndarray, pc: np.ndarray) -> np.ndarray:
        if _normalize_ordering(self.proc_order) == ROW_MAJOR:
            return pr * self.p_cols + pc
        return pr + pc * self.p_rows

    @property
    def n_procs(self) -> int:
        return self.p_rows * self.p_cols


def axis_histogram(extent: int, b_src: int, p_src: int, b_dst: int, p_dst: int) -> np.ndarray:
    """Elements along one axis per (source grid coord, destination grid coord)."""
    splits = np.union1d(np.arange(0, extent, b_src), np.arange(0, extent, b_dst))
    lengths = np.diff(np.append(splits, extent))
    src = (splits // b_src) % p_src
    dst = (splits // b_dst) % p_dst
    h = np.zeros(p_src * p_dst, dtype=np.int64)
    np.add.at(h, src * p_dst + dst, lengths)
    return h.reshape(p_src, p_dst)


def cyclic_volume_matrix(m: int, n: int, src: CyclicSpec, dst: CyclicSpec,
                         elem_size: int = 8) -> np.ndarray:
    """``V[i, j]`` bytes sent from source rank i to destination rank j."""
    hr = axis_histogram(m, src.block, src.p_rows, dst.block, dst.p_rows)
    hc = axis_histogram(n, src.block, src.p_cols, dst.block, dst.p_cols)
    a, b, c, d = np.meshgrid(np.arange(src.p_rows), np.arange(dst.p_rows),
                             np.arange(src.p_cols), np.arange(dst.p_cols), indexing="ij")
    w = hr[a, b] * hc[c, d] * elem_size
    P = max(src.n_procs, dst.n_procs)
    V = np.zeros(P * P, dtype=np.int64)
    np.add.at(V, (src.rank(a, c) * P + dst.rank(b, d)).ravel(), w.ravel())
    return V.reshape(P, P)


@dataclass(frozen=True)
class SweepRow:
    block_size: int
    volume_before: int
    volume_after: int
    sigma: tuple[int, ...]

    @property
    def reduction_pct(self) -> float:
        if self.volume_before == 0:
            return 0.0
        return 100.0 * (self.volume_before - self.volume_after) / self.volume_before


def sweep_row(volumes: np.ndarray, block_size: int, solver: str = "greedy") -> SweepRow:
    g = CommGraph.from_volumes(volumes)
    r = solve_lap(gain_matrix(CostModel.locally_free(), g), solver)
    before = int(volumes.sum() - np.trace(volumes))
    return SweepRow(block_size, before, before - r.total_gain, r.sigma)


def volume_sweep(m: int, n: int, p_rows: int, p_cols: int, target_block: int,
                 block_sizes, solver: str = "greedy", elem_size: int = 8,
                 initial_order: str = "row-major", target_order: str = "col-major"):
    """One :class:`SweepRow` per initial block size; the target layout is fixed."""
    dst = CyclicSpec(target_block, p_rows, p_cols, target_order)
    rows = []
    for bs in block_sizes:
        src = CyclicSpec(int(bs), p_rows, p_cols, initial_order)
        rows.append(sweep_row(cyclic_volume_matrix(m, n, src, dst, elem_size), int(bs), solver))
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block_size", "volume_before", "volume_after_relabel", "reduction_pct"])
    for r in rows:
        w.writerow([r.block_size, r.volume_before, r.volume_after, f"{r.reduction_pct:.6f}"])
    return buf.getvalue()
