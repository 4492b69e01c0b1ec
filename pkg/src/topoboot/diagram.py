"""Persistence diagram containers and their JSON form."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from dataclasses import field as dc_field
from typing import Iterable, Optional, Sequence

import numpy as np

Simplex = tuple  # sorted vertex indices


@dataclass(frozen=True)
class PersistenceInterval:
    dim: int
    birth: float
    death: float  # math.inf for essential classes
    birth_simplex: Simplex = ()
    death_simplex: Optional[Simplex] = None
    prevalence: Optional[float] = None

    @property
    def persistence(self) -> float:
        return self.death - self.birth

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.death)


def _sort_key(iv):
    return (iv.dim, iv.birth, iv.death, iv.birth_simplex, iv.death_simplex or ())


@dataclass
class PersistenceDiagram:
    """Multiset of intervals over Z/2, kept in (dim, birth, death) order."""

    intervals: list
    source_label: str = ""
    field: str = "Z2"
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.intervals = sorted(self.intervals, key=_sort_key)

    def __len__(self):
        return len(self.intervals)

    def in_dim(self, k: int, finite_only: bool = False) -> list:
        return [iv for iv in self.intervals
                if iv.dim == k and (iv.is_finite or not finite_only)]

    def finite(self) -> "PersistenceDiagram":
        return replace(self, intervals=[iv for iv in self.intervals if iv.is_finite])

    def as_array(self, k: int, finite_only: bool = True) -> np.ndarray:
        """(m, 2) array of (birth, death) in dimension k."""
        ivs = self.in_dim(k, finite_only)
        return np.array([(iv.birth, iv.death) for iv in ivs], dtype=float).reshape(-1, 2)

    def prevalences(self, k: int) -> np.ndarray:
        ivs = self.in_dim(k, finite_only=True)
        if any(iv.prevalence is None for iv in ivs):
            raise ValueError(f"diagram {self.source_label!r} lacks prevalence in dim {k}")
        return np.array([iv.prevalence for iv in ivs], dtype=float)

    def values(self):
        """Multiset view (dim, birth, death) for equality checks."""
        return sorted((iv.dim, iv.birth, iv.death) for iv in self.intervals)

    def to_dict(self) -> dict:
        out = {"source": self.source_label, "field": self.field, "intervals": []}
        for iv in self.intervals:
            out["intervals"].append({
                "dim": iv.dim,
                "birth": iv.birth,
                "death": iv.death if iv.is_finite else None,
                "prevalence": iv.prevalence,
                "birth_simplex": list(iv.birth_simplex),
                "death_simplex": None if iv.death_simplex is None else list(iv.death_simplex),
            })
        if self.metadata:
            out["metadata"] = self.metadata
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "PersistenceDiagram":
        ivs = []
        for rec in obj["intervals"]:
            death = math.inf if rec["death"] is None else float(rec["death"])
            ds = rec.get("death_simplex")
            ivs.append(PersistenceInterval(
                dim=int(rec["dim"]), birth=float(rec["birth"]), death=death,
                birth_simplex=tuple(rec.get("birth_simplex") or ()),
                death_simplex=None if ds is None else tuple(ds),
                prevalence=rec.get("prevalence"),
            ))
        return cls(ivs, source_label=obj.get("source", ""), field=obj.get("field", "Z2"),
                   metadata=obj.get("metadata", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PersistenceDiagram":
        return cls.from_dict(json.loads(text))


def diagram_from_pairs(dim: int, births: Iterable[float], deaths: Iterable[float],
                       prevalences: Optional[Sequence[float]] = None,
                       label: str = "") -> PersistenceDiagram:
    """Build a diagram from bare coordinates (test and CLI convenience)."""
    births = list(births)
    deaths = list(deaths)
    if prevalences is None:
        prevalences = [None] * len(births)
    ivs = [PersistenceInterval(dim, float(b), float(d), prevalence=p)
           for b, d, p in zip(births, deaths, prevalences)]
    return PersistenceDiagram(ivs, source_label=label)
