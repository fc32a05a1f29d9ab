import math
import statistics
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from icu_radiomics.clinical import (
    CANONICAL_COLUMNS,
    ClinicalTable,
    column_means,
    derive_lw_ratio,
    example_schema,
    impute_array,
    impute_means,
    parse_clinical_csv,
    write_clinical_csv,
)
from icu_radiomics.errors import AllMissingColumn, DuplicateSubjectId, MissingLabelColumn, RangeViolation
from icu_radiomics.evalharness.synth import synth_site_a_table

HEADER = "id,age,sex,wbc,lym,lym_ratio,temperature,spo2,icu\n"
CANON = {"id": "id", "label": "icu", "columns": {c: c for c in CANONICAL_COLUMNS}}


def _csv(tmp_path, body, header=HEADER):
    p = tmp_path / "c.csv"
    p.write_text(header + body)
    return p


def test_parse_row_with_missing(tmp_path):
    t = parse_clinical_csv(_csv(tmp_path, "P1, 56, M, 5800, 1200, , 37.2, 92, 0\n"), CANON)
    assert t.ids == ("P1",)
    row = dict(zip(t.columns, t.values[0]))
    assert math.isnan(row["lym_ratio"])
    assert row["age"] == 56 and row["sex"] == 1 and row["wbc"] == 5800 and row["spo2"] == 92
    assert t.labels.tolist() == [0]


def test_range_violation(tmp_path):
    with pytest.raises(RangeViolation) as e:
        parse_clinical_csv(_csv(tmp_path, "P1,56,M,5800,1200,,37.2,150,0\n"), CANON)
    assert e.value.args[0].startswith("row 1") and "spo2" in e.value.args[0]


@pytest.mark.parametrize("cell,col", [("age", "0"), ("temperature", "46"), ("lym_ratio", "-1"), ("sex", "X")])
def test_other_violations(tmp_path, cell, col):
    vals = {"age": "56", "sex": "F", "wbc": "5800", "lym": "1200", "lym_ratio": "", "temperature": "37", "spo2": "95"}
    vals[cell] = col
    body = "P1," + ",".join(vals[c] for c in CANONICAL_COLUMNS) + ",1\n"
    with pytest.raises(RangeViolation):
        parse_clinical_csv(_csv(tmp_path, body), CANON)


def test_missing_label_and_duplicates(tmp_path):
    with pytest.raises(MissingLabelColumn):
        parse_clinical_csv(_csv(tmp_path, "P1,56,M,1,1,,37,90\n", HEADER.replace(",icu", "")), CANON)
    with pytest.raises(DuplicateSubjectId):
        parse_clinical_csv(_csv(tmp_path, "P1,56,M,1,1,,37,90,0\nP1,57,F,1,1,,37,90,1\n"), CANON)


def test_unknown_column_warns(tmp_path):
    p = _csv(tmp_path, "P1,56,M,1,1,,37,90,0,x\n", HEADER.replace("icu\n", "icu,extra\n"))
    with pytest.warns(UserWarning, match="extra"):
        parse_clinical_csv(p, CANON)


def test_site_a_shape_roundtrip(tmp_path):
    t = synth_site_a_table(seed=1)
    assert len(t.ids) == 113 and int(t.labels.sum()) == 42 and int((t.labels == 0).sum()) == 71
    schema = example_schema("A")
    write_clinical_csv(tmp_path / "a.csv", t, schema)
    back = parse_clinical_csv(tmp_path / "a.csv", schema)
    assert back.ids == t.ids and back.columns == t.columns
    assert np.array_equal(np.isnan(back.values), np.isnan(t.values))
    assert np.array_equal(np.nan_to_num(back.values), np.nan_to_num(t.values))
    assert np.array_equal(back.labels, t.labels)


@pytest.mark.parametrize("site", ["A", "B", "C"])
def test_bundled_schemas_load(site):
    s = example_schema(site)
    assert set(s["columns"].values()) <= set(CANONICAL_COLUMNS)


def _table(rows, cols=("lym", "wbc", "lym_ratio")):
    return ClinicalTable(tuple(f"S{i}" for i in range(len(rows))), cols, np.array(rows, float), np.zeros(len(rows), int))


def test_lw_ratio():
    t = derive_lw_ratio(_table([[1200, 6000, np.nan], [1200, 0, np.nan], [np.nan, 6000, np.nan], [1000, 5000, 33.0]]))
    r = t.column("lym_ratio")
    assert r[0] == 20.0 and math.isnan(r[1]) and math.isnan(r[2]) and r[3] == 33.0
    again = derive_lw_ratio(t)
    assert np.array_equal(np.nan_to_num(again.values, nan=-1), np.nan_to_num(t.values, nan=-1))


def test_lw_ratio_adds_missing_column():
    t = derive_lw_ratio(_table([[1000, 4000]], ("lym", "wbc")))
    assert t.columns[-1] == "lym_ratio" and t.column("lym_ratio")[0] == 25.0


def test_impute_simple():
    t = impute_means(_table([[2.0], [np.nan], [4.0]], ("age",)))
    assert t.values[:, 0].tolist() == [2.0, 3.0, 4.0]


def test_impute_training_fold_only():
    vals = [[10.0], [20.0], [np.nan], [1000.0]]
    t = _table(vals, ("age",))
    out = impute_means(t, fit_subjects=["S0", "S1", "S2"])
    assert out.values[2, 0] == statistics.mean([10.0, 20.0]) == 15.0
    assert out.values[3, 0] == 1000.0


def test_impute_all_missing():
    with pytest.raises(AllMissingColumn):
        impute_means(_table([[np.nan], [1.0]], ("age",)), fit_subjects=["S0"])


@given(st.lists(st.one_of(st.none(), st.floats(-1e6, 1e6)), min_size=1, max_size=40))
def test_impute_properties(cells):
    if all(c is None for c in cells):
        cells[0] = 1.0
    vals = np.array([[np.nan if c is None else c] for c in cells])
    t = _table(vals.tolist(), ("age",))
    out = impute_means(t)
    present = ~np.isnan(vals[:, 0])
    assert not np.isnan(out.values).any()
    assert np.array_equal(out.values[present, 0], vals[present, 0])
    assert out.values[~present, 0].tolist() == [statistics.mean(vals[present, 0].tolist())] * int((~present).sum())
    assert np.array_equal(impute_means(out).values, out.values)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50), st.randoms(use_true_random=False))
def test_column_mean_order_free(xs, rnd):
    col = np.array(xs)[:, None]
    shuffled = list(xs)
    rnd.shuffle(shuffled)
    assert column_means(col)[0] == column_means(np.array(shuffled)[:, None])[0] == statistics.mean(xs)


def test_impute_array_only_touches_missing_columns():
    X = np.array([[1.0, np.nan], [3.0, 5.0], [np.nan, 7.0]])
    out = impute_array(X, fit_rows=[0, 1])
    assert out.tolist() == [[1.0, 5.0], [3.0, 5.0], [2.0, 7.0]]
    full = np.array([[1.0, 2.0]])
    assert np.array_equal(impute_array(full), full)


@pytest.mark.parametrize("seed", range(5))
def test_site_a_spo2_mean(seed):
    t = synth_site_a_table(seed=seed)
    spo2 = t.column("spo2")
    observed = [v for v in spo2.tolist() if not math.isnan(v)]
    assert len(observed) == 104
    filled = impute_means(t).column("spo2")[np.isnan(spo2)]
    assert filled.tolist() == [91.9] * 9
    assert filled[0] == statistics.mean(observed)
