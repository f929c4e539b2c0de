import json

import numpy as np
import pytest

from bifionet.data import DatasetBundle, load_bundle, read_table, save_bundle
from bifionet.errors import ContractError, DimensionError, ParseError


def _bundle():
    rng = np.random.default_rng(0)
    return DatasetBundle(
        rng.standard_normal((3, 4)),
        rng.standard_normal((6, 2)),
        rng.standard_normal(6),
        [0, 0, 1, 1, 2, 2],
        rng.standard_normal(6),
        {"example": "unit"},
    )


def test_validation_of_counts_and_index():
    with pytest.raises(DimensionError):
        DatasetBundle(np.zeros((2, 1)), np.zeros((3, 1)), np.zeros(2), [0, 1])
    with pytest.raises(ContractError):
        DatasetBundle(np.zeros((2, 1)), np.zeros((2, 1)), np.zeros(2), [0, 2])


def test_truth_adds_offset():
    b = _bundle()
    np.testing.assert_array_equal(b.truth, b.target + b.offset)


def test_round_trip_is_exact_and_idempotent(tmp_path):
    b = _bundle()
    save_bundle(b, tmp_path / "a")
    back = load_bundle(tmp_path / "a")
    for name in ("branch", "trunk", "target", "index", "offset"):
        assert getattr(back, name).tobytes() == getattr(b, name).tobytes()
    assert back.meta == b.meta
    save_bundle(back, tmp_path / "b")
    for f in ("meta.json", "branch.csv", "trunk.csv", "target.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_meta_sidecar_counts(tmp_path):
    save_bundle(_bundle(), tmp_path)
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert (meta["n_functions"], meta["n_rows"], meta["m"], meta["trunk_dim"]) == (3, 6, 4, 2)
    assert meta["format"] == "bifionet-bundle/1"


def test_numbers_written_with_17_digits(tmp_path):
    b = DatasetBundle([[0.1]], [[1 / 3]], [2 / 3], [0])
    save_bundle(b, tmp_path)
    assert "0.33333333333333331" in (tmp_path / "trunk.csv").read_text()


def test_read_table_reports_ragged_row(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n1,2\n3\n")
    with pytest.raises(ParseError) as err:
        read_table(p)
    assert err.value.line == 3


def test_read_table_reports_non_numeric(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n1,2\n3,x\n")
    with pytest.raises(ParseError, match=":3:"):
        read_table(p)


def test_load_bundle_rejects_meta_mismatch(tmp_path):
    save_bundle(_bundle(), tmp_path)
    meta = json.loads((tmp_path / "meta.json").read_text())
    meta["m"] = 5
    (tmp_path / "meta.json").write_text(json.dumps(meta))
    with pytest.raises(ParseError, match="m=5"):
        load_bundle(tmp_path)


def test_load_bundle_missing_index_column(tmp_path):
    save_bundle(_bundle(), tmp_path)
    (tmp_path / "target.csv").write_text("target,offset\n1,0\n")
    with pytest.raises(ParseError, match="branch_index"):
        load_bundle(tmp_path)


def test_subset_functions_reindexes():
    b = _bundle()
    s = b.subset_functions([2, 0])
    assert s.n_functions == 2 and s.n_rows == 4
    np.testing.assert_array_equal(s.branch, b.branch[[2, 0]])
    np.testing.assert_array_equal(s.index, [1, 1, 0, 0])
