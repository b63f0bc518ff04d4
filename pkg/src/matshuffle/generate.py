"""Seeded random layouts and matrices for tests and ``matshuffle gen``."""

from __future__ import annotations

import numpy as np

from .layout import COL_MAJOR, ROW_MAJOR, Grid, Layout, StorageDesc, make_block_cyclic


def random_splits(rng: np.random.Generator, extent: int, max_blocks: int) -> np.ndarray:
    k = int(rng.integers(1, min(max_blocks, extent) + 1))
    inner = rng.choice(np.arange(1, extent), size=k - 1, replace=False) if k > 1 else []
    return np.concatenate(([0], np.sort(inner), [extent])).astype(np.int64)


def random_storage(rng: np.random.Generator, grid: Grid, owners: np.ndarray, n_procs: int):
    """Per-process storage in shuffled order with random padding and ordering."""
    storage = {}
    for p in range(n_procs):
        blocks = [tuple(ij) for ij in np.argwhere(owners == p)]
        rng.shuffle(blocks)
        offset = 0
        for i, j in blocks:
            b = grid.block(int(i), int(j))
            order = ROW_MAJOR if rng.random() < 0.5 else COL_MAJOR
            inner, outer = (b.cols, b.rows) if order == ROW_MAJOR else (b.rows, b.cols)
            ld = inner + int(rng.integers(0, 3))
            offset += int(rng.integers(0, 3))
            storage[int(i), int(j)] = StorageDesc(ld, order, offset)
            offset += ld * outer
    return storage


def random_irregular_layout(rng: np.random.Generator, m: int, n: int, n_procs: int,
                            elem_size: int = 8, max_blocks: int = 6) -> Layout:
    grid = Grid(random_splits(rng, m, max_blocks), random_splits(rng, n, max_blocks))
    owners = rng.integers(0, n_procs, size=grid.shape)
    return Layout(grid, owners, n_procs, elem_size, random_storage(rng, grid, owners, n_procs))


def random_block_cyclic(rng: np.random.Generator, m: int, n: int, n_procs: int,
                        elem_size: int = 8) -> Layout:
    divisors = [d for d in range(1, n_procs + 1) if n_procs % d == 0]
    pr = int(rng.choice(divisors))
    order = ROW_MAJOR if rng.random() < 0.5 else COL_MAJOR
    mb = int(rng.integers(1, max(2, m // 2 + 1)))
    nb = int(rng.integers(1, max(2, n // 2 + 1)))
    return make_block_cyclic(m, n, mb, nb, pr, n_procs // pr, order, elem_size)


def random_layout(rng: np.random.Generator, m: int, n: int, n_procs: int,
                  elem_size: int = 8) -> Layout:
    """Either a (usually ragged) block-cyclic or a hand-irregular layout."""
    if rng.random() < 0.5:
        return random_block_cyclic(rng, m, n, n_procs, elem_size)
    return random_irregular_layout(rng, m, n, n_procs, elem_size)


def random_matrix(rng: np.random.Generator, shape, dtype="int64", low=-9, high=10) -> np.ndarray:
    """Integer-valued entries, exactly representable in every supported dtype."""
    dt = np.dtype(dtype)
    a = rng.integers(low, high, size=shape)
    if dt.kind == "c":
        a = a + 1j * rng.integers(low, high, size=shape)
    return a.astype(dt)
