"""Position measurements from retrieval results and retrieval-quality metrics."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .aerial_db import AerialDatabase, GeoDescriptor
from .descriptor import Descriptor
from .geo import Position2

CONVERGENCE_TOL = 1e-3
MAX_ITERATIONS = 100


@dataclass(frozen=True)
class Cluster:
    members: tuple[Position2, ...]
    mean: Position2
    indices: tuple[int, ...]
    """Positions of the members in the clustered input."""

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Measurement:
    z: Position2
    support: int

    def __post_init__(self) -> None:
        if self.support < 1:
            raise ValueError("measurement support must be at least 1")


@dataclass(frozen=True)
class RecallCurve:
    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        recalls = [r for _, r in self.points]
        if any(b < a for a, b in zip(recalls, recalls[1:])):
            raise ValueError("recall must be non-decreasing in k_fraction")

    def at(self, k_fraction: float) -> float:
        for f, r in self.points:
            if math.isclose(f, k_fraction):
                return r
        raise KeyError(k_fraction)


def _as_xy(points) -> np.ndarray:
    if len(points) and isinstance(points[0], Position2):
        return np.array([[p.x, p.y] for p in points], dtype=float)
    return np.asarray(points, dtype=float).reshape(-1, 2)


def seek_modes(xy: np.ndarray, bandwidth: float) -> np.ndarray:
    """Run flat-kernel mean shift from every point; return converged modes."""
    modes = xy.copy()
    active = np.ones(len(xy), dtype=bool)
    for _ in range(MAX_ITERATIONS):
        if not active.any():
            break
        cur = modes[active]
        diff = cur[:, None, :] - xy[None, :, :]
        inside = np.hypot(diff[..., 0], diff[..., 1]) <= bandwidth
        # A mode always has at least one data point in its window: it starts
        # on a data point and every later mode is a mean of points within it.
        new = (inside @ xy) / inside.sum(axis=1, keepdims=True)
        shift = np.hypot(*(new - cur).T)
        modes[active] = new
        idx = np.nonzero(active)[0]
        active[idx[shift < CONVERGENCE_TOL]] = False
    return modes


def _merge_modes(modes: np.ndarray, radius: float) -> np.ndarray:
    """Label modes by connected components of the ``dist <= radius`` graph."""
    n = len(modes)
    diff = modes[:, None, :] - modes[None, :, :]
    adjacent = np.hypot(diff[..., 0], diff[..., 1]) <= radius
    labels = np.full(n, -1, dtype=np.int64)
    next_label = 0
    for seed in range(n):
        if labels[seed] >= 0:
            continue
        labels[seed] = next_label
        stack = [seed]
        while stack:
            i = stack.pop()
            for j in np.nonzero(adjacent[i] & (labels < 0))[0]:
                labels[j] = next_label
                stack.append(j)
        next_label += 1
    return labels


def mean_shift(points: Sequence[Position2] | np.ndarray, bandwidth: float) -> list[Cluster]:
    """Flat-kernel mean shift clustering of planar points.

    Every point climbs to the mean of the input points within ``bandwidth`` of
    its current mode until the shift drops below 1 mm (at most 100 rounds).
    Converged modes closer than ``bandwidth / 2`` are merged transitively.
    Clusters come back ordered by their first member's input index; each
    cluster's ``mean`` is the arithmetic mean of its members, not the mode.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    xy = _as_xy(points)
    if len(xy) == 0:
        raise ValueError("mean_shift needs at least one point")
    labels = _merge_modes(seek_modes(xy, bandwidth), bandwidth / 2.0)
    clusters = []
    for label in range(labels.max() + 1):
        idx = np.nonzero(labels == label)[0]
        members = tuple(Position2(float(x), float(y)) for x, y in xy[idx])
        mean = xy[idx].mean(axis=0)
        clusters.append(Cluster(members, Position2(float(mean[0]), float(mean[1])), tuple(int(i) for i in idx)))
    return clusters


def measurement_from_retrievals(retrievals: Sequence[GeoDescriptor], bandwidth: float) -> Measurement:
    """Mean of the largest retrieval cluster, as a noisy position fix.

    ``retrievals`` must be in rank order.  Equal-sized clusters are split in
    favour of the one holding the rank-1 retrieval, then the one holding the
    lowest entry id.
    """
    if not retrievals:
        raise ValueError("need at least one retrieval")
    clusters = mean_shift([r.position for r in retrievals], bandwidth)
    ids = [r.id for r in retrievals]

    def key(c: Cluster):
        return (-c.size, 0 if 0 in c.indices else 1, min(ids[i] for i in c.indices))

    best = min(clusters, key=key)
    return Measurement(best.mean, best.size)


def _k_for_fraction(k_fraction: float, n: int) -> int:
    if not 0 < k_fraction <= 1:
        raise ValueError(f"k_fraction must be in (0, 1], got {k_fraction}")
    # Absorb float noise such as 0.07 * 100 == 7.000000000000001.
    return max(1, math.ceil(k_fraction * n - 1e-9))


def true_match_ranks(db: AerialDatabase, queries: Sequence[tuple[Descriptor, int]]) -> np.ndarray:
    """Zero-based rank of each query's true entry under the top-k ordering."""
    if not queries:
        raise ValueError("need at least one query")
    ranks = np.empty(len(queries), dtype=np.int64)
    for n, (q, true_id) in enumerate(queries):
        row = db.index_of(true_id)
        d = db.descriptor_distances(q)
        ahead = (d < d[row]) | ((d == d[row]) & (db.ids < db.ids[row]))
        ranks[n] = int(ahead.sum())
    return ranks


def recall_at_fraction(db: AerialDatabase, queries: Sequence[tuple[Descriptor, int]], k_fraction: float) -> float:
    k = _k_for_fraction(k_fraction, len(db))
    return float(np.mean(true_match_ranks(db, queries) < k))


DEFAULT_FRACTIONS = (0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)


def recall_curve(
    db: AerialDatabase,
    queries: Sequence[tuple[Descriptor, int]] | None = None,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    ranks: np.ndarray | None = None,
) -> RecallCurve:
    """Recall at each fraction of the database size.

    Pass precomputed ``ranks`` (from :func:`true_match_ranks`) to skip the
    descriptor scan.
    """
    if ranks is None:
        ranks = true_match_ranks(db, queries)
    fractions = sorted(fractions)
    pts = tuple((float(f), float(np.mean(ranks < _k_for_fraction(f, len(db))))) for f in fractions)
    return RecallCurve(pts)
