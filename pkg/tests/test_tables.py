import numpy as np
import pytest

from hetnids.dataprep.datasets import select_features
from hetnids.dataprep.registry import FEATURE_NAMES
from hetnids.dataprep.tables import (
    CsvFormatError,
    RawTable,
    binarize_labels,
    clean,
    feature_column_index,
    load_flow_csv,
)
from conftest import write_flow_csv


def test_load_and_clean(tmp_path):
    p = write_flow_csv(tmp_path / "f.csv", [
        (1, 2, 3, 4, "NORMAL"),
        (1, 2, 3, 4, "NORMAL"),      # duplicate
        (1, "", 3, 4, "DoS"),        # missing cell
        (5, "inf", 7, 8, "DoS"),     # infinite cell
        (9, 10, 11, 12, "PortScan"),
        (13, 14, 15, 16, ""),        # missing label
    ])
    t = load_flow_csv(p)
    assert t.n_rows == 6
    c = clean(t)
    assert c.n_rows == 2
    np.testing.assert_array_equal(c.values, [[1, 2, 3, 4], [9, 10, 11, 12]])


def test_clean_idempotent(tmp_path):
    rng = np.random.default_rng(0)
    vals = rng.integers(0, 3, size=(60, 3)).astype(float)
    vals[rng.random(vals.shape) < 0.05] = np.nan
    labels = np.array(rng.choice(["NORMAL", "DoS"], 60), dtype=object)
    t = RawTable(["a", "b", "c", "multilabel"], vals, labels)
    once = clean(t)
    twice = clean(once)
    np.testing.assert_array_equal(once.values, twice.values)
    np.testing.assert_array_equal(once.labels, twice.labels)


def test_clean_all_rows_dropped():
    t = RawTable(["a", "multilabel"], np.array([[np.nan]]), np.array(["NORMAL"], dtype=object))
    with pytest.raises(ValueError, match="no rows"):
        clean(t)


def test_binarize_case_insensitive():
    t = RawTable(["a", "multilabel"], np.zeros((4, 1)),
                 np.array(["NORMAL", " normal ", "DDoS", "Bot"], dtype=object))
    np.testing.assert_array_equal(binarize_labels(t).labels, [0, 0, 1, 1])


def test_arity_error_names_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,multilabel\n1,2,NORMAL\n1,NORMAL\n")
    with pytest.raises(CsvFormatError, match="row 2"):
        load_flow_csv(p)


def test_missing_label_column(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,Label\n1,2,NORMAL\n")
    with pytest.raises(CsvFormatError, match="multilabel"):
        load_flow_csv(p)
    assert load_flow_csv(p, "Label").n_rows == 1


def test_select_features_by_name(tmp_path):
    p = write_flow_csv(tmp_path / "f.csv", [(1, 2, 3, 4, "NORMAL"), (5, 6, 7, 8, "DoS")],
                       ids=(4, 2, 1, 3))
    t = binarize_labels(clean(load_flow_csv(p)))
    ds = select_features(t, [1, 4])
    np.testing.assert_array_equal(ds.features, [[3, 1], [7, 5]])
    np.testing.assert_array_equal(ds.labels, [0, 1])
    assert ds.feature_ids == [1, 4]


def test_header_name_normalisation():
    cols = ["Flow Bytes/s", " Protocol ", "multilabel"]
    t = RawTable(cols, np.zeros((1, 2)), np.array([0]))
    assert feature_column_index(t, [1, 15]) == [1, 0]
    assert FEATURE_NAMES[15] == "Flow_Bytess"


def test_unknown_feature_column():
    t = RawTable(["Protocol", "multilabel"], np.zeros((1, 1)), np.array([0]))
    with pytest.raises(KeyError):
        feature_column_index(t, [2])
