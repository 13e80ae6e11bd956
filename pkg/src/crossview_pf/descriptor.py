"""Image embedding vectors and the L2 metric used to compare them."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence

import numpy as np


class DimensionMismatchError(ValueError):
    pass


class Descriptor:
    """Immutable finite real vector standing in for an image embedding."""

    __slots__ = ("values",)

    def __init__(self, values) -> None:
        arr = np.array(values, dtype=float).reshape(-1)
        if arr.size == 0:
            raise ValueError("descriptor must have at least one component")
        if not np.all(np.isfinite(arr)):
            raise ValueError("descriptor components must be finite")
        arr.flags.writeable = False
        self.values = arr

    @property
    def dimension(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Descriptor):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(np.all(self.values == other.values))

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    def __repr__(self) -> str:
        return f"Descriptor(dim={self.dimension})"


def l2_distance(a: Descriptor, b: Descriptor) -> float:
    if a.dimension != b.dimension:
        raise DimensionMismatchError(f"descriptor dimensions differ: {a.dimension} != {b.dimension}")
    # hypot scales internally, so tiny non-zero differences do not underflow to 0.
    return math.hypot(*(a.values - b.values))


class DescriptorSet:
    """Ordered descriptors of one dimension, stored as an ``(n, D)`` matrix."""

    def __init__(self, dimension: int, items: Iterable[Descriptor] = ()) -> None:
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = int(dimension)
        rows = []
        for i, d in enumerate(items):
            if d.dimension != self.dimension:
                raise DimensionMismatchError(
                    f"item {i} has dimension {d.dimension}, expected {self.dimension}"
                )
            rows.append(d.values)
        self.matrix = np.array(rows, dtype=float).reshape(len(rows), self.dimension)
        self.matrix.flags.writeable = False

    @classmethod
    def from_matrix(cls, matrix) -> DescriptorSet:
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("descriptor matrix must be 2-d")
        if not np.all(np.isfinite(m)):
            raise ValueError("descriptor components must be finite")
        out = cls.__new__(cls)
        out.dimension = m.shape[1]
        out.matrix = m.copy()
        out.matrix.flags.writeable = False
        return out

    @property
    def items(self) -> Sequence[Descriptor]:
        return [Descriptor(row) for row in self.matrix]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def __getitem__(self, i: int) -> Descriptor:
        return Descriptor(self.matrix[i])

    def distances_to(self, q: Descriptor) -> np.ndarray:
        """L2 distance from ``q`` to every item, in item order."""
        if q.dimension != self.dimension:
            raise DimensionMismatchError(f"query dimension {q.dimension} != set dimension {self.dimension}")
        diff = self.matrix - q.values
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
