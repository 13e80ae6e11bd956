"""Geotagged aerial descriptor database.

Two query paths are supported: nearest entry by planar position (used by the
compare-all weighting once per particle) and top-k entries by descriptor
distance (used by retrieval-based measurements and recall metrics).  Both are
exact; the k-d tree only accelerates the position query and every ambiguous
case is resolved by recomputing distances with a fixed tie-break on id.
"""

from __future__ import annotations

from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .descriptor import Descriptor, DescriptorSet, DimensionMismatchError
from .geo import Position2

# Relative slack used to decide whether the tree's candidate list could be
# missing an equidistant entry.
_TIE_SLACK = 1e-9


class EmptyDatabaseError(ValueError):
    pass


@dataclass(frozen=True)
class GeoDescriptor:
    id: int
    position: Position2
    descriptor: Descriptor


class AerialDatabase:
    """Immutable set of :class:`GeoDescriptor` entries of one dimension."""

    def __init__(self, entries: Iterable[GeoDescriptor]) -> None:
        entries = list(entries)
        if not entries:
            raise EmptyDatabaseError("aerial database needs at least one entry")
        ids = [e.id for e in entries]
        seen: set[int] = set()
        for i in ids:
            if i in seen:
                raise ValueError(f"duplicate aerial id {i}")
            seen.add(i)
        self.entries: tuple[GeoDescriptor, ...] = tuple(entries)
        self.dimension = entries[0].descriptor.dimension
        self.descriptors = DescriptorSet(self.dimension, (e.descriptor for e in entries))
        self.ids = np.array(ids, dtype=np.int64)
        self.positions = np.array([[e.position.x, e.position.y] for e in entries], dtype=float)
        self.ids.flags.writeable = False
        self.positions.flags.writeable = False
        self._tree = cKDTree(self.positions)
        self._index_of_id = {int(i): n for n, i in enumerate(ids)}
        self._distance_cache: dict[Hashable, np.ndarray] = {}

    @classmethod
    def from_arrays(cls, ids, positions, descriptors) -> AerialDatabase:
        ids = np.asarray(ids)
        positions = np.asarray(positions, dtype=float)
        descriptors = np.asarray(descriptors, dtype=float)
        if not (len(ids) == len(positions) == len(descriptors)):
            raise ValueError("ids, positions and descriptors must have equal length")
        return cls(
            GeoDescriptor(int(i), Position2(float(p[0]), float(p[1])), Descriptor(d))
            for i, p, d in zip(ids, positions, descriptors)
        )

    def __len__(self) -> int:
        return len(self.entries)

    def index_of(self, entry_id: int) -> int:
        try:
            return self._index_of_id[int(entry_id)]
        except KeyError:
            raise KeyError(f"unknown aerial id {entry_id}") from None

    def entry(self, entry_id: int) -> GeoDescriptor:
        return self.entries[self.index_of(entry_id)]

    # -- position space -------------------------------------------------

    def nearest_indices(self, points) -> np.ndarray:
        """Row index of the nearest entry for each point of an ``(m, 2)`` array."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        n = len(self.entries)
        if len(pts) == 0:
            return np.zeros(0, dtype=np.int64)
        k = min(4, n)
        tree_d, cand = self._tree.query(pts, k=k)
        tree_d = tree_d.reshape(len(pts), k)
        cand = cand.reshape(len(pts), k)

        diff = self.positions[cand] - pts[:, None, :]
        exact = np.hypot(diff[..., 0], diff[..., 1])
        best = exact.min(axis=1)
        cand_ids = np.where(exact == best[:, None], self.ids[cand], np.iinfo(np.int64).max)
        result = cand[np.arange(len(pts)), cand_ids.argmin(axis=1)]

        if k < n:
            # The k-th tree neighbour may tie with the best one; then entries
            # beyond the candidate list could tie as well.
            open_rows = np.nonzero(tree_d[:, -1] <= best * (1 + _TIE_SLACK) + 1e-12)[0]
            for r in open_rows:
                result[r] = self._nearest_exhaustive_ball(pts[r], best[r])
        return result

    def _nearest_exhaustive_ball(self, pt: np.ndarray, radius: float) -> int:
        rows = np.array(self._tree.query_ball_point(pt, radius * (1 + _TIE_SLACK) + 1e-12), dtype=np.int64)
        diff = self.positions[rows] - pt
        exact = np.hypot(diff[:, 0], diff[:, 1])
        tied = rows[exact == exact.min()]
        return int(tied[np.argmin(self.ids[tied])])

    def nearest_by_position(self, p: Position2) -> GeoDescriptor:
        return self.entries[int(self.nearest_indices([[p.x, p.y]])[0])]

    # -- descriptor space -----------------------------------------------

    def descriptor_distances(self, q: Descriptor, cache_key: Hashable | None = None) -> np.ndarray:
        """L2 distance from ``q`` to every entry, optionally memoised under ``cache_key``."""
        if cache_key is not None:
            hit = self._distance_cache.get(cache_key)
            if hit is not None:
                return hit
        if q.dimension != self.dimension:
            raise DimensionMismatchError(f"query dimension {q.dimension} != database dimension {self.dimension}")
        d = self.descriptors.distances_to(q)
        d.flags.writeable = False
        if cache_key is not None:
            self._distance_cache[cache_key] = d
        return d

    def clear_cache(self) -> None:
        self._distance_cache.clear()

    def ranking(self, q: Descriptor, cache_key: Hashable | None = None) -> np.ndarray:
        """Row indices ordered by ascending descriptor distance, ties by id."""
        d = self.descriptor_distances(q, cache_key)
        return np.lexsort((self.ids, d))

    def top_k_indices(self, q: Descriptor, k: int, cache_key: Hashable | None = None) -> np.ndarray:
        n = len(self.entries)
        if not 1 <= k <= n:
            raise ValueError(f"k must be in [1, {n}], got {k}")
        return self.ranking(q, cache_key)[:k]

    def top_k_by_descriptor(self, q: Descriptor, k: int, cache_key: Hashable | None = None) -> list[GeoDescriptor]:
        return [self.entries[i] for i in self.top_k_indices(q, k, cache_key)]


def nearest_by_position(db: AerialDatabase, p: Position2) -> GeoDescriptor:
    return db.nearest_by_position(p)


def top_k_by_descriptor(db: AerialDatabase, q: Descriptor, k: int) -> Sequence[GeoDescriptor]:
    return db.top_k_by_descriptor(q, k)
