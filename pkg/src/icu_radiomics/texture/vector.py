from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

# guards log2(0) in entropy terms
EPS = np.spacing(1)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Ordered, uniquely named feature values."""

    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if len(names) != values.size:
            raise ValueError(f"{len(names)} names for {values.size} values")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.names)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))

    def prefixed(self, prefix: str) -> "FeatureVector":
        return FeatureVector(tuple(f"{prefix}-{n}" for n in self.names), self.values)

    @staticmethod
    def concat(parts: Iterable["FeatureVector"]) -> "FeatureVector":
        parts = list(parts)
        names = tuple(n for p in parts for n in p.names)
        values = np.concatenate([p.values for p in parts]) if parts else np.zeros(0)
        return FeatureVector(names, values)
