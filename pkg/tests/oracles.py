"""Brute-force reference implementations, deliberately written without numpy
vectorisation so they share no code path with the package."""

from __future__ import annotations

import math


def linear_nearest(positions, ids, p):
    best = None
    for (x, y), i in zip(positions, ids):
        key = (math.hypot(x - p[0], y - p[1]), i)
        if best is None or key < best:
            best = key
    return best[1]


def linear_top_k(descriptors, ids, q, k):
    scored = []
    for d, i in zip(descriptors, ids):
        dist = math.sqrt(sum((a - b) ** 2 for a, b in zip(d, q)))
        scored.append((dist, i))
    scored.sort()
    return [i for _, i in scored[:k]]


def brute_mean_shift(points, bandwidth, tol=1e-3, max_iter=100):
    """Flat-kernel mode seeking from every point, then transitive merging of
    modes closer than bandwidth / 2.  Returns (partition, means) where the
    partition is a set of frozensets of input indices."""
    modes = []
    for px, py in points:
        mx, my = px, py
        for _ in range(max_iter):
            sx = sy = 0.0
            n = 0
            for qx, qy in points:
                if math.hypot(qx - mx, qy - my) <= bandwidth:
                    sx += qx
                    sy += qy
                    n += 1
            nx, ny = sx / n, sy / n
            moved = math.hypot(nx - mx, ny - my)
            mx, my = nx, ny
            if moved < tol:
                break
        modes.append((mx, my))

    # Union-find over the "modes within bandwidth / 2" relation.
    parent = list(range(len(modes)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(modes)):
        for j in range(i + 1, len(modes)):
            if math.hypot(modes[i][0] - modes[j][0], modes[i][1] - modes[j][1]) <= bandwidth / 2:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(len(modes)):
        groups.setdefault(find(i), []).append(i)
    partition = {frozenset(g) for g in groups.values()}
    means = {
        frozenset(g): (sum(points[i][0] for i in g) / len(g), sum(points[i][1] for i in g) / len(g))
        for g in groups.values()
    }
    return partition, means


def linear_recall(descriptors, ids, queries, k):
    hits = 0
    for q, true_id in queries:
        if true_id in linear_top_k(descriptors, ids, q, k):
            hits += 1
    return hits / len(queries)


def sus_counts(weights, u, m=None):
    """Copy counts from stochastic universal sampling with offset u and m
    pointers, by walking the cumulative distribution pointer by pointer."""
    n = len(weights)
    m = n if m is None else m
    counts = [0] * n
    total = sum(weights)
    cum = 0.0
    last = max(k for k in range(n) if weights[k] > 0)
    i = 0
    for j in range(m):
        pointer = (u + j / m) * total
        while i < last and cum + weights[i] <= pointer:
            cum += weights[i]
            i += 1
        counts[i] += 1
    return counts
