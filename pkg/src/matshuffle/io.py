"""Readers and writers for layout, topology and matrix files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cost import CostModel
from .errors import LayoutError, ParseError
from .layout import Grid, Layout, StorageDesc, make_block_cyclic

MATRIX_MAGIC = "MATSHUFFLE-MATRIX"
MATRIX_DTYPES = ("int64", "float64", "complex128")


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected a JSON object")
    return data


def layout_from_dict(d: dict) -> Layout:
    """Build a layout from its JSON form (explicit or block-cyclic shorthand)."""
    try:
        if "block_cyclic" in d:
            bc = dict(d["block_cyclic"])
            elem_size = int(bc.pop("elem_size", d.get("elem_size", 8)))
            return make_block_cyclic(
                int(bc["m"]), int(bc["n"]), int(bc["mb"]), int(bc["nb"]),
                int(bc["p_rows"]), int(bc["p_cols"]),
                bc.get("proc_order", "row-major"), elem_size)
        grid = Grid(d["row_splits"], d["col_splits"])
        for key, got in (("rows", grid.n_rows), ("cols", grid.n_cols)):
            if key in d and int(d[key]) != got:
                raise LayoutError(f"{key}={d[key]} disagrees with splits ending at {got}")
        storage = None
        if "storage" in d:
            storage = [[StorageDesc(int(s["leading_dimension"]), s.get("ordering", "col-major"),
                                    int(s.get("offset", 0))) for s in row] for row in d["storage"]]
        n_procs = d.get("n_procs")
        return Layout(grid, d["owners"], None if n_procs is None else int(n_procs),
                      int(d.get("elem_size", 8)), storage)
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"malformed layout description: {exc!r}") from exc


def layout_to_dict(layout: Layout, with_storage: bool = False) -> dict:
    m, n = layout.extent
    d = {
        "rows": m,
        "cols": n,
        "row_splits": layout.grid.row_splits.tolist(),
        "col_splits": layout.grid.col_splits.tolist(),
        "n_procs": layout.n_procs,
        "owners": layout.owners.tolist(),
        "elem_size": layout.elem_size,
    }
    if with_storage:
        nbr, nbc = layout.grid.shape
        d["storage"] = [[vars(layout.storage(i, j)) for j in range(nbc)] for i in range(nbr)]
    return d


def load_layout(path) -> Layout:
    return layout_from_dict(_read_json(path))


def save_layout(layout: Layout, path, with_storage: bool = False) -> None:
    Path(path).write_text(json.dumps(layout_to_dict(layout, with_storage)) + "\n")


def load_topology(path) -> CostModel:
    """Latency-bandwidth model from ``{"latency": [[..]], "bandwidth": [[..]]}``."""
    d = _read_json(path)
    try:
        return CostModel.latency_bandwidth(d["latency"], d["bandwidth"])
    except KeyError as exc:
        raise ParseError(f"{path}: missing {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_matrix(path, a: np.ndarray) -> None:
    """Text header line, then the elements little-endian in row-major order.

    Header: ``MATSHUFFLE-MATRIX <rows> <cols> <dtype>``.
    """
    a = np.asarray(a)
    name = a.dtype.name
    if a.ndim != 2 or name not in MATRIX_DTYPES:
        raise ValueError(f"cannot store {a.ndim}-d {name} array")
    with open(path, "wb") as fh:
        fh.write(f"{MATRIX_MAGIC} {a.shape[0]} {a.shape[1]} {name}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<")).tobytes())


def read_matrix(path) -> np.ndarray:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    nl = raw.find(b"\n")
    try:
        magic, rows, cols, name = raw[:nl].decode("ascii").split()
        rows, cols = int(rows), int(cols)
    except ValueError as exc:
        raise ParseError(f"{path}: bad matrix header") from exc
    if magic != MATRIX_MAGIC or name not in MATRIX_DTYPES:
        raise ParseError(f"{path}: bad matrix header")
    dt = np.dtype(name).newbyteorder("<")
    body = raw[nl + 1:]
    if len(body) != rows * cols * dt.itemsize:
        raise ParseError(f"{path}: expected {rows * cols} elements of {name}")
    return np.frombuffer(body, dtype=dt).reshape(rows, cols).astype(name)
