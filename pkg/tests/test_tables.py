import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from icu_radiomics.errors import DimensionMismatch, DuplicateSubjectId
from icu_radiomics.hlq import hlq_feature_names
from icu_radiomics.tables import FeatureTable, feature_group, read_feature_csv, write_feature_csv
from icu_radiomics.texture import wlr_feature_names


def test_groups():
    assert feature_group(hlq_feature_names()[5]) == "HLQ"
    assert feature_group(wlr_feature_names()[100]) == "WLR"
    assert feature_group("SpO2") == "DVB"


def test_select_groups():
    names = (hlq_feature_names()[0], wlr_feature_names()[0], "Age")
    t = FeatureTable(("a", "b"), names, np.arange(6.0).reshape(2, 3), [0, 1])
    assert t.select_groups(["HLQ", "DVB"]).names == (names[0], "Age")
    with pytest.raises(ValueError, match="XYZ"):
        t.select_groups(["XYZ"])


def test_validation():
    with pytest.raises(DuplicateSubjectId):
        FeatureTable(("a", "a"), ("x",), [[1.0], [2.0]])
    with pytest.raises(DimensionMismatch):
        FeatureTable(("a", "b"), ("x",), [[1.0], [2.0]], [1])
    t = FeatureTable(("a",), ("x",), [[1.0]])
    with pytest.raises(ValueError):
        t.values[0, 0] = 2


def test_hstack_and_rows():
    a = FeatureTable(("s1", "s2"), ("x",), [[1.0], [2.0]], [0, 1])
    b = FeatureTable(("s2", "s1"), ("y",), [[20.0], [10.0]])
    c = a.hstack(b)
    assert c.names == ("x", "y") and c.values.tolist() == [[1.0, 10.0], [2.0, 20.0]]
    assert c.select_rows(["s2"]).labels.tolist() == [1]
    d = FeatureTable(("s1", "s2"), ("x", "z"), [[1.0, np.nan], [2.0, np.nan]]).drop_empty_columns()
    assert d.names == ("x",)


@given(st.lists(st.one_of(st.none(), st.floats(allow_nan=False, allow_infinity=False)), min_size=6, max_size=6))
def test_csv_roundtrip(tmp_path_factory, cells):
    vals = np.array([math.nan if c is None else c for c in cells]).reshape(2, 3)
    t = FeatureTable(("p1", "p2"), ("L/W ratio", "Lobe#2 RPO HU3", "LoG(σ=2.5)-GLCM-MCC"), vals, [1, 0])
    p = tmp_path_factory.mktemp("csv") / "f.csv"
    write_feature_csv(p, t, {"config_hash": "abc", "seed": 3})
    back, meta = read_feature_csv(p)
    assert meta == {"config_hash": "abc", "seed": "3"}
    assert back.names == t.names and back.ids == t.ids and back.labels.tolist() == [1, 0]
    assert np.array_equal(np.isnan(back.values), np.isnan(vals))
    assert np.array_equal(np.nan_to_num(back.values), np.nan_to_num(vals))
