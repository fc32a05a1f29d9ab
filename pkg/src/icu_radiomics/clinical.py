"""Demographic, vital-sign and blood-test (DVB) features.

Missing cells are stored as NaN. Sex is encoded 0 = F, 1 = M and treated as
numeric.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from fractions import Fraction
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AllMissingColumn, DuplicateSubjectId, MissingLabelColumn, RangeViolation

CANONICAL_COLUMNS = ("age", "sex", "wbc", "lym", "lym_ratio", "temperature", "spo2")

# display names used in feature tables and ranking reports
DISPLAY_NAMES = {
    "age": "Age",
    "sex": "Gender",
    "wbc": "WBC",
    "lym": "Lym count",
    "lym_ratio": "L/W ratio",
    "temperature": "Temperature",
    "spo2": "SpO2",
}

_SEX_CODES = {"m": 1.0, "male": 1.0, "1": 1.0, "1.0": 1.0, "f": 0.0, "female": 0.0, "0": 0.0, "0.0": 0.0}


def _check_range(col: str, v: float) -> bool:
    if col in ("lym_ratio", "spo2"):
        return 0.0 <= v <= 100.0
    if col == "age":
        return v > 0
    if col == "temperature":
        return 30.0 < v < 45.0
    if col == "sex":
        return v in (0.0, 1.0)
    if col in ("wbc", "lym"):
        return v >= 0
    return True


@dataclass(frozen=True, eq=False)
class ClinicalTable:
    ids: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray  # (n_subjects, n_columns), NaN = missing
    labels: np.ndarray  # ICU admission, 0/1

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise DuplicateSubjectId("subject ids must be unique")
        values = np.asarray(self.values, dtype=np.float64).reshape(len(self.ids), len(self.columns))
        values.flags.writeable = False
        labels = np.asarray(self.labels, dtype=np.int64)
        labels.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def rows(self, subjects: Iterable[str]) -> np.ndarray:
        index = {s: i for i, s in enumerate(self.ids)}
        return np.array([index[s] for s in subjects], dtype=np.int64)

    def drop_empty_columns(self) -> "ClinicalTable":
        """Remove columns with no observed value at all (e.g. SpO2 absent at a site)."""
        keep = [j for j in range(len(self.columns)) if not np.all(np.isnan(self.values[:, j]))]
        return replace(self, columns=tuple(self.columns[j] for j in keep), values=self.values[:, keep])

    def display_names(self) -> tuple[str, ...]:
        return tuple(DISPLAY_NAMES.get(c, c) for c in self.columns)


def load_schema(schema: str | Path | Mapping) -> dict:
    if isinstance(schema, Mapping):
        return dict(schema)
    return json.loads(Path(schema).read_text())


def example_schema(site: str) -> dict:
    """Bundled column mapping for the Site A/B/C table shapes."""
    text = resources.files("icu_radiomics").joinpath("schemas", f"site_{site.lower()}.json").read_text()
    return json.loads(text)


def _parse_cell(raw: str, col: str, row: int, sex_map: Mapping[str, float]) -> float:
    raw = raw.strip()
    if raw == "" or raw.lower() in ("na", "nan", "null"):
        return math.nan
    if col == "sex":
        key = raw.lower()
        if key in sex_map:
            return float(sex_map[key])
        raise RangeViolation(f"row {row}: unrecognised sex value {raw!r}", row, col)
    try:
        v = float(raw)
    except ValueError:
        raise RangeViolation(f"row {row}: column {col!r} value {raw!r} is not numeric", row, col) from None
    if not math.isfinite(v) or not _check_range(col, v):
        raise RangeViolation(f"row {row}: column {col!r} value {v} out of range", row, col)
    return v


def parse_clinical_csv(path: str | Path, schema: str | Path | Mapping) -> ClinicalTable:
    """Read a site CSV using a schema that maps its headers to canonical names.

    Schema keys: ``id`` (header of the subject id column), ``label`` (header of
    the ICU label column), ``columns`` ({file header: canonical name}), and
    optionally ``sex_codes`` ({file value: 0/1}).
    """
    sch = load_schema(schema)
    id_col = sch.get("id", "subject_id")
    label_col = sch.get("label", "icu")
    mapping: dict[str, str] = dict(sch.get("columns", {}))
    for canon in mapping.values():
        if canon not in CANONICAL_COLUMNS:
            raise ValueError(f"schema maps to unknown canonical column {canon!r}")
    sex_map = dict(_SEX_CODES)
    sex_map.update({str(k).lower(): float(v) for k, v in sch.get("sex_codes", {}).items()})

    with open(path, newline="") as fh:
        reader = csv.reader(fh, skipinitialspace=True)
        rows = [r for r in reader if r and not r[0].startswith("#")]
    if not rows:
        raise MissingLabelColumn(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if label_col not in header:
        raise MissingLabelColumn(f"{path}: label column {label_col!r} not found")
    if id_col not in header:
        raise ValueError(f"{path}: id column {id_col!r} not found")
    unknown = [h for h in header if h not in mapping and h not in (id_col, label_col)]
    if unknown:
        warnings.warn(f"{path}: ignoring unmapped columns {unknown}", stacklevel=2)

    columns = tuple(c for c in CANONICAL_COLUMNS if c in mapping.values())
    src = {canon: header.index(h) for h, canon in mapping.items() if h in header}
    ids, values, labels = [], [], []
    seen: set[str] = set()
    for r, row in enumerate(rows[1:], start=1):
        row = row + [""] * (len(header) - len(row))
        sid = row[header.index(id_col)].strip()
        if sid in seen:
            raise DuplicateSubjectId(f"row {r}: duplicate subject id {sid!r}")
        seen.add(sid)
        lab = row[header.index(label_col)].strip()
        if lab not in ("0", "1"):
            raise RangeViolation(f"row {r}: label must be 0 or 1, got {lab!r}", r, label_col)
        ids.append(sid)
        labels.append(int(lab))
        values.append([_parse_cell(row[src[c]], c, r, sex_map) if c in src else math.nan for c in columns])
    return ClinicalTable(tuple(ids), columns, np.array(values, dtype=np.float64).reshape(len(ids), len(columns)), np.array(labels))


def write_clinical_csv(path: str | Path, table: ClinicalTable, schema: Mapping | None = None) -> None:
    """Write ``table`` with headers from ``schema`` (canonical names if omitted)."""
    sch = dict(schema or {})
    id_col = sch.get("id", "subject_id")
    label_col = sch.get("label", "icu")
    inverse = {canon: h for h, canon in sch.get("columns", {c: c for c in table.columns}).items()}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([id_col] + [inverse.get(c, c) for c in table.columns] + [label_col])
        for sid, vals, lab in zip(table.ids, table.values, table.labels):
            cells = ["" if math.isnan(v) else ("MF"[int(v == 0)] if c == "sex" else repr(float(v))) for c, v in zip(table.columns, vals)]
            w.writerow([sid] + cells + [int(lab)])


def derive_lw_ratio(table: ClinicalTable) -> ClinicalTable:
    """Fill missing ``lym_ratio`` with ``100 * lym / wbc`` where both are known and wbc > 0."""
    if not {"lym", "wbc"} <= set(table.columns):
        return table
    values = np.array(table.values)
    columns = table.columns
    if "lym_ratio" not in columns:
        columns = columns + ("lym_ratio",)
        values = np.concatenate([values, np.full((len(table.ids), 1), np.nan)], axis=1)
    lym = values[:, columns.index("lym")]
    wbc = values[:, columns.index("wbc")]
    j = columns.index("lym_ratio")
    fill = np.isnan(values[:, j]) & ~np.isnan(lym) & ~np.isnan(wbc) & (wbc > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        values[fill, j] = 100.0 * lym[fill] / wbc[fill]
    return ClinicalTable(table.ids, columns, values, table.labels)


def column_means(values: np.ndarray, rows: Sequence[int] | np.ndarray | None = None, names=None) -> np.ndarray:
    """Mean of the observed entries of each column over ``rows``.

    The mean is computed in exact rational arithmetic and rounded once, so
    it does not depend on row order.
    """
    sub = values if rows is None else values[np.asarray(rows)]
    out = np.empty(values.shape[1])
    for j in range(values.shape[1]):
        col = sub[:, j]
        present = col[~np.isnan(col)]
        if present.size == 0:
            label = names[j] if names is not None else j
            raise AllMissingColumn(f"column {label!r} has no observed value among the fit subjects")
        out[j] = float(sum(map(Fraction, present.tolist()), Fraction(0)) / present.size)
    return out


def fill_missing(values: np.ndarray, means: np.ndarray) -> np.ndarray:
    """Copy of ``values`` with each NaN replaced by its column's entry in ``means``."""
    out = np.array(values, dtype=np.float64)
    r, c = np.nonzero(np.isnan(out))
    out[r, c] = means[c]
    return out


def impute_means(table: ClinicalTable, fit_subjects: Iterable[str] | None = None) -> ClinicalTable:
    """Replace missing cells by the column mean over ``fit_subjects`` (all if None)."""
    rows = None if fit_subjects is None else table.rows(fit_subjects)
    means = column_means(np.asarray(table.values), rows, table.columns)
    return ClinicalTable(table.ids, table.columns, fill_missing(table.values, means), table.labels)


def impute_array(values: np.ndarray, fit_rows=None, names=None) -> np.ndarray:
    """Mean-impute only the columns of ``values`` that contain missing cells."""
    values = np.asarray(values, dtype=np.float64)
    cols = np.flatnonzero(np.isnan(values).any(axis=0))
    if cols.size == 0:
        return values.copy()
    sub_names = None if names is None else [names[j] for j in cols]
    means = column_means(values[:, cols], fit_rows, sub_names)
    out = values.copy()
    out[:, cols] = fill_missing(values[:, cols], means)
    return out
