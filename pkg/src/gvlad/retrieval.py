"""Exact brute-force L2 ranking and AP / mAP scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional

import numpy as np

from .encoder import EncodedVector
from .errors import EmptyInputError, InvalidArgumentError, UndefinedQueryError, ValidationError

_SCAN_ROWS = 65536


def _values(v) -> np.ndarray:
    if isinstance(v, EncodedVector):
        return v.values
    return np.asarray(v, dtype=np.float64).reshape(-1)


@dataclass(frozen=True)
class DatasetIndex:
    ids: tuple
    vectors: np.ndarray

    def __post_init__(self):
        if len(self.ids) != self.vectors.shape[0]:
            raise ValidationError("row count does not match id count")
        self.vectors.setflags(write=False)
        object.__setattr__(self, "_pos", {i: n for n, i in enumerate(self.ids)})

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def position(self, image_id) -> int:
        return self._pos[image_id]


def build_index(entries: Iterable[tuple], dtype=np.float32) -> DatasetIndex:
    """Stack ``(id, vector)`` pairs into an immutable index.

    Vectors are stored as ``dtype`` (float32 by default: 512 bytes per
    128-d signature); distances are always accumulated in float64.
    """
    ids, rows = [], []
    for image_id, vec in entries:
        ids.append(image_id)
        rows.append(_values(vec))
    if not ids:
        raise EmptyInputError("cannot build an index from no entries")
    if len(set(ids)) != len(ids):
        seen, dup = set(), None
        for i in ids:
            if i in seen:
                dup = i
                break
            seen.add(i)
        raise ValidationError(f"duplicate image id {dup!r}")
    dims = {r.shape[0] for r in rows}
    if len(dims) != 1:
        raise ValidationError(f"inconsistent vector dimensions {sorted(dims)}")
    return DatasetIndex(tuple(ids), np.stack(rows).astype(dtype))


@dataclass(frozen=True)
class RankingResult:
    ids: tuple
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[tuple]:
        return iter(zip(self.ids, self.distances.tolist()))


def squared_distances(index: DatasetIndex, q) -> np.ndarray:
    q = _values(q)
    if q.shape[0] != index.dim:
        raise InvalidArgumentError(f"query dimension {q.shape[0]} does not match index dim {index.dim}")
    # compare at storage precision so a stored copy of q is at distance exactly 0
    q = q.astype(index.vectors.dtype).astype(np.float64)
    out = np.empty(len(index), dtype=np.float64)
    for s in range(0, len(index), _SCAN_ROWS):
        diff = index.vectors[s:s + _SCAN_ROWS].astype(np.float64) - q
        out[s:s + _SCAN_ROWS] = np.einsum("nd,nd->n", diff, diff)
    return out


def query_knn(index: DatasetIndex, q, k: int, exclude=None) -> RankingResult:
    """Top-``k`` images by ascending L2 distance; equal distances keep insertion order."""
    if int(k) != k or k < 1:
        raise InvalidArgumentError(f"k must be a positive integer, got {k!r}")
    d2 = squared_distances(index, q)
    valid = np.ones(len(index), dtype=bool)
    if exclude is not None and exclude in index._pos:
        valid[index.position(exclude)] = False
    cand = np.flatnonzero(valid)
    k = min(int(k), cand.size)
    if k < cand.size:
        # keep everything tied with the k-th value so the tie order is exact
        kth = np.partition(d2[cand], k - 1)[k - 1]
        cand = cand[d2[cand] <= kth]
    order = cand[np.argsort(d2[cand], kind="stable")][:k]
    return RankingResult(tuple(index.ids[i] for i in order), np.sqrt(d2[order]))


@dataclass(frozen=True)
class QueryTruth:
    relevant: frozenset
    ignore: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "relevant", frozenset(self.relevant))
        object.__setattr__(self, "ignore", frozenset(self.ignore))
        overlap = self.relevant & self.ignore
        if overlap:
            raise ValidationError(f"ids both relevant and ignored: {sorted(map(str, overlap))}")


class GroundTruth(dict):
    """Mapping of query id to :class:`QueryTruth`."""

    def __setitem__(self, key, value):
        if not isinstance(value, QueryTruth):
            raise ValidationError("ground truth entries must be QueryTruth")
        super().__setitem__(key, value)


def average_precision(ranking, truth: QueryTruth) -> float:
    """Mean of precision-at-rank over every relevant item.

    Ignored ids are dropped from ``ranking`` before scoring, and relevant
    items that never appear contribute zero. ``ranking`` may be a
    :class:`RankingResult` or any sequence of ids.
    """
    if not truth.relevant:
        raise UndefinedQueryError("query has no relevant items")
    ids = ranking.ids if isinstance(ranking, RankingResult) else ranking
    precisions = []
    hits = 0
    rank = 0
    for image_id in ids:
        if image_id in truth.ignore:
            continue
        rank += 1
        if image_id in truth.relevant:
            hits += 1
            precisions.append(hits / rank)
    return math.fsum(precisions) / len(truth.relevant)


def mean_average_precision(aps) -> float:
    aps = list(aps.values()) if isinstance(aps, Mapping) else list(aps)
    if not aps:
        raise EmptyInputError("no scored queries")
    return math.fsum(aps) / len(aps)


@dataclass(frozen=True)
class Evaluation:
    aps: dict
    rankings: dict

    @property
    def map(self) -> float:
        return mean_average_precision(self.aps)


def evaluate(index: DatasetIndex, queries: Mapping, truth: Mapping, k: Optional[int] = None,
             exclude_self: bool = True) -> Evaluation:
    """Rank every query against ``index`` and score the ones present in ``truth``.

    ``queries`` maps query id to vector. With ``exclude_self`` a query whose
    id also names an indexed image never retrieves itself.
    """
    aps, rankings = {}, {}
    for qid, qvec in queries.items():
        if qid not in truth:
            continue
        ranking = query_knn(index, qvec, k or len(index), exclude=qid if exclude_self else None)
        rankings[qid] = ranking
        aps[qid] = average_precision(ranking, truth[qid])
    if not aps:
        raise EmptyInputError("no query has ground truth")
    return Evaluation(aps, rankings)
