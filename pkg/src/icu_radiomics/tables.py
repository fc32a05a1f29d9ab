"""Subject x feature tables shared by extraction, ranking and evaluation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._io import atomic_write_text
from .errors import DimensionMismatch, DuplicateSubjectId
from .hlq import hlq_feature_names
from .texture.extract import wlr_feature_names

GROUPS = ("HLQ", "WLR", "DVB")

_HLQ = frozenset(hlq_feature_names())
_WLR = frozenset(wlr_feature_names())


def feature_group(name: str) -> str:
    """HLQ and WLR names are fixed; anything else is treated as DVB."""
    if name in _HLQ:
        return "HLQ"
    if name in _WLR:
        return "WLR"
    return "DVB"


@dataclass(frozen=True, eq=False)
class FeatureTable:
    ids: tuple[str, ...]
    names: tuple[str, ...]
    values: np.ndarray  # (n_subjects, n_features), NaN = missing
    labels: np.ndarray | None = None

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        names = tuple(self.names)
        if len(set(ids)) != len(ids):
            raise DuplicateSubjectId("subject ids must be unique")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        values = np.array(self.values, dtype=np.float64).reshape(len(ids), len(names))
        values.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64).ravel()
            if labels.size != len(ids):
                raise DimensionMismatch(f"{labels.size} labels for {len(ids)} subjects")
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def groups(self) -> tuple[str, ...]:
        return tuple(feature_group(n) for n in self.names)

    def select_groups(self, groups: Iterable[str]) -> "FeatureTable":
        wanted = set(groups)
        bad = wanted - set(GROUPS)
        if bad:
            raise ValueError(f"unknown feature group(s) {sorted(bad)}; expected a subset of {GROUPS}")
        keep = [j for j, g in enumerate(self.groups) if g in wanted]
        return self.select_columns([self.names[j] for j in keep])

    def select_columns(self, names: Sequence[str]) -> "FeatureTable":
        index = {n: j for j, n in enumerate(self.names)}
        cols = [index[n] for n in names]
        return FeatureTable(self.ids, tuple(names), self.values[:, cols], self.labels)

    def select_rows(self, ids: Sequence[str]) -> "FeatureTable":
        index = {s: i for i, s in enumerate(self.ids)}
        rows = [index[s] for s in ids]
        labels = None if self.labels is None else self.labels[rows]
        return FeatureTable(tuple(ids), self.names, self.values[rows], labels)

    def drop_empty_columns(self) -> "FeatureTable":
        keep = [self.names[j] for j in range(len(self.names)) if not np.isnan(self.values[:, j]).all()]
        return self.select_columns(keep)

    def with_labels(self, labels) -> "FeatureTable":
        return FeatureTable(self.ids, self.names, self.values, labels)

    def hstack(self, other: "FeatureTable") -> "FeatureTable":
        """Join columns of two tables over the subjects of ``self``."""
        other = other.select_rows(self.ids)
        labels = self.labels if self.labels is not None else other.labels
        return FeatureTable(self.ids, self.names + other.names, np.hstack([self.values, other.values]), labels)

    @classmethod
    def from_rows(cls, rows: Mapping[str, Mapping[str, float]], names: Sequence[str], labels=None) -> "FeatureTable":
        ids = tuple(rows)
        values = np.array([[rows[s].get(n, math.nan) for n in names] for s in ids], dtype=np.float64)
        return cls(ids, tuple(names), values.reshape(len(ids), len(names)), labels)


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_feature_csv(path: str | Path, table: FeatureTable, meta: Mapping[str, object] | None = None) -> None:
    """Write ``table`` as CSV; ``meta`` entries become leading ``# key=value`` lines."""
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    has_labels = table.labels is not None
    w.writerow(["subject_id", *table.names] + (["label"] if has_labels else []))
    for i, sid in enumerate(table.ids):
        row = [sid, *(_fmt(v) for v in table.values[i])]
        if has_labels:
            row.append(int(table.labels[i]))
        w.writerow(row)
    atomic_write_text(path, buf.getvalue())


def read_feature_csv(path: str | Path) -> tuple[FeatureTable, dict[str, str]]:
    meta: dict[str, str] = {}
    lines = Path(path).read_text().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    header = rows[0]
    if header[0] != "subject_id":
        raise ValueError(f"{path}: first column must be subject_id")
    has_labels = header[-1] == "label"
    names = tuple(header[1:-1] if has_labels else header[1:])
    ids, values, labels = [], [], []
    for r in rows[1:]:
        ids.append(r[0])
        cells = r[1 : 1 + len(names)]
        values.append([math.nan if c == "" else float(c) for c in cells])
        if has_labels:
            labels.append(int(r[-1]))
    arr = np.array(values, dtype=np.float64).reshape(len(ids), len(names))
    return FeatureTable(tuple(ids), names, arr, labels if has_labels else None), meta

