"""Grouped hierarchies and their zero-constraint matrix ``C y = 0``."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateSeriesId,
    InconsistentPartition,
    MissingBottomValue,
)


@dataclass(frozen=True)
class Grouping:
    name: str
    aggregates: dict[str, tuple[str, ...]]


@dataclass(frozen=True)
class GroupedHierarchySpec:
    """A grand total, a bottom level, and one or more groupings of the bottoms.

    Each grouping partitions the same bottom set, e.g. zones and energy
    sources over zone x source cells. A grouping without aggregates adds no
    rows: its bottoms sum straight into the top. Use :meth:`validate` (called by
    :func:`build_constraint_matrix`) to check the partition invariants.
    """

    top_id: str
    bottom_ids: tuple[str, ...]
    groupings: tuple[Grouping, ...]

    @classmethod
    def from_dict(cls, data: Mapping) -> "GroupedHierarchySpec":
        groupings = tuple(
            Grouping(
                name=str(g["name"]),
                aggregates={str(k): tuple(map(str, v)) for k, v in g["aggregates"].items()},
            )
            for g in data.get("groupings", [])
        )
        return cls(
            top_id=str(data["top"]),
            bottom_ids=tuple(map(str, data["bottoms"])),
            groupings=groupings,
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "GroupedHierarchySpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "top": self.top_id,
            "bottoms": list(self.bottom_ids),
            "groupings": [
                {"name": g.name, "aggregates": {k: list(v) for k, v in g.aggregates.items()}}
                for g in self.groupings
            ],
        }

    @classmethod
    def cross(cls, top: str, factors: Mapping[str, Sequence[str]], sep: str = "_"):
        """Full cross-classification, e.g. ``{"zone": [...], "source": [...]}``.

        Bottoms are the cartesian product of the factor levels; each factor
        becomes a grouping whose aggregates are named by the level.
        """
        names = list(factors)
        levels = [list(factors[k]) for k in names]
        bottoms = [sep.join(combo) for combo in _product(levels)]
        combos = list(_product(levels))
        groupings = []
        for pos, name in enumerate(names):
            aggs = {
                lvl: tuple(b for b, c in zip(bottoms, combos) if c[pos] == lvl)
                for lvl in levels[pos]
            }
            groupings.append(Grouping(name=name, aggregates=aggs))
        return cls(top_id=top, bottom_ids=tuple(bottoms), groupings=tuple(groupings))

    @property
    def upper_ids(self) -> tuple[str, ...]:
        ids = [self.top_id]
        for g in self.groupings:
            ids.extend(g.aggregates)
        return tuple(ids)

    @property
    def series_ids(self) -> tuple[str, ...]:
        return self.upper_ids + self.bottom_ids

    def validate(self) -> None:
        if not self.groupings:
            raise InconsistentPartition("at least one grouping is required")
        dupes = [k for k, c in Counter(self.series_ids).items() if c > 1]
        if dupes:
            raise DuplicateSeriesId(f"series ids used more than once: {sorted(dupes)}")
        bottoms = set(self.bottom_ids)
        for g in self.groupings:
            if not g.aggregates:
                # bottoms add up straight into the top
                continue
            seen = Counter(b for members in g.aggregates.values() for b in members)
            unknown = sorted(set(seen) - bottoms)
            if unknown:
                raise InconsistentPartition(f"grouping {g.name!r} references unknown bottoms {unknown}")
            repeated = sorted(b for b, c in seen.items() if c > 1)
            if repeated:
                raise InconsistentPartition(f"grouping {g.name!r} repeats bottoms {repeated}")
            missing = sorted(bottoms - set(seen))
            if missing:
                raise InconsistentPartition(f"grouping {g.name!r} misses bottoms {missing}")
            empty = [a for a, members in g.aggregates.items() if not members]
            if empty:
                raise InconsistentPartition(f"grouping {g.name!r} has empty aggregates {empty}")


def _product(levels):
    if not levels:
        yield ()
        return
    for head in levels[0]:
        for rest in _product(levels[1:]):
            yield (head,) + rest


@dataclass(frozen=True)
class ConstraintMatrix:
    """Zero-constraint matrix with entries in {-1, 0, +1}.

    Columns are ordered uppers first, then bottoms; row ``r`` belongs to the
    upper series in column ``r``.
    """

    C: np.ndarray
    series_ids: tuple[str, ...]
    ordering: dict[str, int] = field(repr=False)

    @classmethod
    def from_array(cls, C, series_ids: Sequence[str] | None = None) -> "ConstraintMatrix":
        C = np.atleast_2d(np.asarray(C, dtype=float))
        if C.size == 0:
            C = C.reshape(0, C.shape[-1])
        if series_ids is None:
            series_ids = [f"s{i}" for i in range(C.shape[1])]
        series_ids = tuple(series_ids)
        if len(series_ids) != C.shape[1]:
            raise DimensionMismatch(f"{len(series_ids)} ids for {C.shape[1]} columns")
        C.setflags(write=False)
        return cls(C=C, series_ids=series_ids, ordering={s: i for i, s in enumerate(series_ids)})

    @property
    def n(self) -> int:
        return self.C.shape[1]

    @property
    def n_u(self) -> int:
        return self.C.shape[0]


def build_constraint_matrix(spec: GroupedHierarchySpec) -> ConstraintMatrix:
    spec.validate()
    ids = spec.series_ids
    col = {s: i for i, s in enumerate(ids)}
    rows = [(spec.top_id, [spec.bottom_ids])]
    for g in spec.groupings:
        rows.extend((agg, [members]) for agg, members in g.aggregates.items())

    C = np.zeros((len(spec.upper_ids), len(ids)))
    for r, (upper, member_lists) in enumerate(rows):
        C[r, col[upper]] = 1.0
        for members in member_lists:
            for b in members:
                C[r, col[b]] = -1.0
    return ConstraintMatrix.from_array(C, ids)


def coherence_residual(C: ConstraintMatrix | np.ndarray, y) -> float:
    """``max|C y| / (1 + max|y|)``, zero for exactly coherent ``y``."""
    Cm = C.C if isinstance(C, ConstraintMatrix) else np.atleast_2d(np.asarray(C, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != Cm.shape[1]:
        raise DimensionMismatch(f"expected vector of length {Cm.shape[1]}, got shape {y.shape}")
    if Cm.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(Cm @ y)) / (1.0 + np.max(np.abs(y))))


def aggregate_bottom_up(spec: GroupedHierarchySpec, bottoms) -> np.ndarray:
    """Coherent vector over all series from bottom-level values.

    ``bottoms`` is either a mapping keyed by bottom id or a sequence in
    ``spec.bottom_ids`` order. Trailing axes (e.g. time) are carried through.
    """
    if isinstance(bottoms, Mapping):
        missing = [b for b in spec.bottom_ids if b not in bottoms]
        if missing:
            raise MissingBottomValue(f"no value for bottoms {missing}")
        values = np.array([bottoms[b] for b in spec.bottom_ids], dtype=float)
    else:
        values = np.asarray(bottoms, dtype=float)
        if values.shape[0] != len(spec.bottom_ids):
            raise MissingBottomValue(
                f"expected {len(spec.bottom_ids)} bottom values, got {values.shape[0]}"
            )
    pos = {b: i for i, b in enumerate(spec.bottom_ids)}
    uppers = [values.sum(axis=0)]
    for g in spec.groupings:
        for members in g.aggregates.values():
            uppers.append(values[[pos[b] for b in members]].sum(axis=0))
    return np.concatenate([np.stack(uppers), values])


def summing_matrix(spec: GroupedHierarchySpec) -> np.ndarray:
    """``S`` with ``y = S b``; handy for simulating coherent data."""
    eye = np.eye(len(spec.bottom_ids))
    return aggregate_bottom_up(spec, eye)
