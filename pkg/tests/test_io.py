import json

import numpy as np
import pytest

from matshuffle.errors import LayoutError, ParseError
from matshuffle.generate import random_irregular_layout, random_matrix
from matshuffle.io import (layout_from_dict, layout_to_dict, load_layout, load_topology,
                           read_matrix, save_layout, write_matrix)
from matshuffle.layout import block_view, make_block_cyclic


def test_layout_round_trip_with_storage(tmp_path):
    L = random_irregular_layout(np.random.default_rng(1), 9, 13, 3)
    save_layout(L, tmp_path / "l.json", with_storage=True)
    back = load_layout(tmp_path / "l.json")
    assert back == L
    nbr, nbc = L.grid.shape
    for i in range(nbr):
        for j in range(nbc):
            assert back.storage(i, j) == L.storage(i, j)


def test_layout_round_trip_default_storage(tmp_path):
    L = make_block_cyclic(10, 7, 3, 2, 2, 2, "col-major")
    save_layout(L, tmp_path / "l.json")
    assert "storage" not in json.loads((tmp_path / "l.json").read_text())
    assert load_layout(tmp_path / "l.json") == L


def test_block_cyclic_shorthand():
    d = {"block_cyclic": {"m": 4, "n": 4, "mb": 2, "nb": 2, "p_rows": 2, "p_cols": 2,
                          "proc_order": "col-major"}}
    L = layout_from_dict(d)
    assert L.owners.tolist() == [[0, 2], [1, 3]]
    assert L == make_block_cyclic(4, 4, 2, 2, 2, 2, "col-major")


def test_explicit_layout_fields():
    d = {"rows": 4, "cols": 2, "row_splits": [0, 1, 4], "col_splits": [0, 2],
         "owners": [[1], [0]], "n_procs": 3, "elem_size": 16}
    L = layout_from_dict(d)
    assert L.n_procs == 3 and L.elem_size == 16
    assert layout_to_dict(L) == d


def test_storage_is_honoured():
    d = {"row_splits": [0, 2], "col_splits": [0, 2], "owners": [[0]],
         "storage": [[{"leading_dimension": 3, "ordering": "row-major", "offset": 1}]]}
    L = layout_from_dict(d)
    buf = np.arange(8)
    assert block_view(buf, L, 0, 0).tolist() == [[1, 2], [4, 5]]


@pytest.mark.parametrize("d, exc", [
    ({"row_splits": [0, 2]}, ParseError),
    ({"row_splits": [0, 2], "col_splits": [0, 2], "owners": [[0, 1]]}, LayoutError),
    ({"rows": 3, "row_splits": [0, 2], "col_splits": [0, 2], "owners": [[0]]}, LayoutError),
    ({"row_splits": [0, 2], "col_splits": [0, 2], "owners": [[0]],
      "storage": [[{"leading_dimension": 1}]]}, LayoutError),
])
def test_bad_layouts(d, exc):
    with pytest.raises(exc):
        layout_from_dict(d)


def test_unreadable_files(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ParseError):
        load_layout(tmp_path / "bad.json")
    with pytest.raises(ParseError):
        load_layout(tmp_path / "missing.json")
    (tmp_path / "list.json").write_text("[1, 2]")
    with pytest.raises(ParseError):
        load_layout(tmp_path / "list.json")


def test_topology(tmp_path):
    p = tmp_path / "topo.json"
    p.write_text(json.dumps({"latency": [[0, 3], [3, 0]], "bandwidth": [[1, 2], [2, 1]]}))
    m = load_topology(p)
    assert m.kind == "latency-bandwidth"
    p.write_text(json.dumps({"latency": [[0, -3], [3, 0]], "bandwidth": [[1, 2], [2, 1]]}))
    with pytest.raises(ParseError):
        load_topology(p)
    p.write_text(json.dumps({"latency": [[0]]}))
    with pytest.raises(ParseError):
        load_topology(p)


@pytest.mark.parametrize("dtype", ["int64", "float64", "complex128"])
def test_matrix_round_trip(tmp_path, dtype):
    a = random_matrix(np.random.default_rng(0), (5, 3), dtype)
    write_matrix(tmp_path / "a.mat", a)
    raw = (tmp_path / "a.mat").read_bytes()
    assert raw.startswith(f"MATSHUFFLE-MATRIX 5 3 {dtype}\n".encode())
    back = read_matrix(tmp_path / "a.mat")
    assert back.dtype == np.dtype(dtype)
    np.testing.assert_array_equal(back, a)


def test_bad_matrix_files(tmp_path):
    p = tmp_path / "a.mat"
    p.write_bytes(b"MATSHUFFLE-MATRIX 2 2 int64\n" + bytes(8))
    with pytest.raises(ParseError):
        read_matrix(p)
    p.write_bytes(b"HELLO 2 2 int64\n" + bytes(32))
    with pytest.raises(ParseError):
        read_matrix(p)
    p.write_bytes(b"MATSHUFFLE-MATRIX 2 two int64\n")
    with pytest.raises(ParseError):
        read_matrix(p)
    with pytest.raises(ValueError):
        write_matrix(p, np.zeros(3))
