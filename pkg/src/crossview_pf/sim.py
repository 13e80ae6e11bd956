"""Synthetic descriptor world used in place of a trained cross-view network.

Aerial entries sit on a square grid and carry i.i.d. Gaussian descriptors.
A ground query at some pose copies the descriptor of the aerial entry nearest
to the pose plus a pairing offset, then adds per-component Gaussian noise.
``descriptor_noise_sigma`` therefore dials retrieval quality and
``alias_groups`` dials perceptual aliasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aerial_db import AerialDatabase
from .descriptor import Descriptor
from .geo import Position2, TimedPose, Velocity2

# Independent random streams derived from one world seed.
_WORLD_STREAM = 0
_RUN_STREAM = 1
_ROUTE_STREAM = 2


@dataclass(frozen=True)
class WorldConfig:
    area_size: float = 1000.0
    grid_spacing: float = 20.0
    descriptor_dim: int = 16
    descriptor_noise_sigma: float = 0.0
    alias_groups: int = 0
    pairing_noise_sigma: float = 4.58
    seed: int = 0
    alias_group_size: int = 2

    def __post_init__(self) -> None:
        if not self.area_size > self.grid_spacing > 0:
            raise ValueError("need area_size > grid_spacing > 0")
        if self.descriptor_dim < 2:
            raise ValueError("descriptor_dim must be >= 2")
        if self.descriptor_noise_sigma < 0 or self.pairing_noise_sigma < 0:
            raise ValueError("sigmas must be non-negative")
        if self.alias_groups < 0:
            raise ValueError("alias_groups must be >= 0")
        if self.alias_group_size < 2:
            raise ValueError("alias_group_size must be >= 2")
        if self.alias_groups * self.alias_group_size > self.cells_per_side**2:
            raise ValueError("not enough cells for the requested alias groups")

    @property
    def cells_per_side(self) -> int:
        # Tolerate float noise in area / spacing.
        return int(np.floor(self.area_size / self.grid_spacing + 1e-9))

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.area_size and 0.0 <= y <= self.area_size


@dataclass(frozen=True)
class GroundRun:
    """Ground vehicle trajectory with per-pose velocity and query descriptor.

    ``velocities[i]`` is the noisy velocity over the interval ending at pose
    ``i``; ``velocities[0]`` is zero because nothing precedes the first pose.
    ``paired_ids[i]`` is the aerial entry the query at pose ``i`` was paired
    with, i.e. its ground-truth match for recall.
    """

    truth: tuple[TimedPose, ...]
    velocities: tuple[Velocity2, ...]
    queries: tuple[Descriptor, ...]
    paired_ids: tuple[int, ...]
    dt: float = 1.0

    def __post_init__(self) -> None:
        n = len(self.truth)
        if not (len(self.velocities) == len(self.queries) == len(self.paired_ids) == n):
            raise ValueError("truth, velocities, queries and paired_ids must have equal length")

    def __len__(self) -> int:
        return len(self.truth)

    @property
    def truth_xy(self) -> np.ndarray:
        return np.array([[p.position.x, p.position.y] for p in self.truth], dtype=float)

    @property
    def velocity_xy(self) -> np.ndarray:
        return np.array([[v.vx, v.vy] for v in self.velocities], dtype=float)

    def query_pairs(self) -> list[tuple[Descriptor, int]]:
        return list(zip(self.queries, self.paired_ids))


def grid_positions(cfg: WorldConfig) -> np.ndarray:
    """Cell centres in row-major order (row = y index)."""
    n = cfg.cells_per_side
    centers = (np.arange(n) + 0.5) * cfg.grid_spacing
    xx, yy = np.meshgrid(centers, centers)
    return np.column_stack([xx.ravel(), yy.ravel()])


def generate_world(cfg: WorldConfig) -> AerialDatabase:
    rng = np.random.default_rng([cfg.seed, _WORLD_STREAM])
    positions = grid_positions(cfg)
    n = len(positions)
    desc = rng.standard_normal((n, cfg.descriptor_dim))
    if cfg.alias_groups:
        chosen = rng.permutation(n)[: cfg.alias_groups * cfg.alias_group_size]
        for group in chosen.reshape(cfg.alias_groups, cfg.alias_group_size):
            desc[group[1:]] = desc[group[0]]
    return AerialDatabase.from_arrays(np.arange(n), positions, desc)


def interpolate_route(waypoints, speed: float, dt: float = 1.0) -> np.ndarray:
    """Constant-speed samples along a polyline, one every ``dt`` seconds."""
    wp = np.asarray([[p.x, p.y] if isinstance(p, Position2) else p for p in waypoints], dtype=float)
    if len(wp) == 0:
        raise ValueError("need at least one waypoint")
    if speed <= 0:
        raise ValueError("speed must be positive")
    seg = np.hypot(*np.diff(wp, axis=0).T)
    keep = np.concatenate([[True], seg > 0])
    wp = wp[keep]
    arc = np.concatenate([[0.0], np.cumsum(seg[seg > 0])])
    n_steps = int(np.floor(arc[-1] / (speed * dt) + 1e-9))
    s = np.minimum(np.arange(n_steps + 1) * speed * dt, arc[-1])
    if len(wp) == 1:
        return np.repeat(wp, n_steps + 1, axis=0)
    return np.column_stack([np.interp(s, arc, wp[:, 0]), np.interp(s, arc, wp[:, 1])])


def generate_ground_run(
    cfg: WorldConfig,
    db: AerialDatabase,
    waypoints,
    speed: float,
    velocity_noise_sigma: float,
    dt: float = 1.0,
) -> GroundRun:
    """Drive along ``waypoints`` at ``speed`` and synthesise what the vehicle senses.

    Noise is drawn as unit normals and then scaled, so two configs that differ
    only in a noise level see the same underlying draws.
    """
    if velocity_noise_sigma < 0:
        raise ValueError("velocity_noise_sigma must be non-negative")
    for p in waypoints:
        x, y = (p.x, p.y) if isinstance(p, Position2) else p
        if not cfg.contains(x, y):
            raise ValueError(f"waypoint ({x}, {y}) lies outside the {cfg.area_size} m world")
    truth = interpolate_route(waypoints, speed, dt)
    n = len(truth)
    rng = np.random.default_rng([cfg.seed, _RUN_STREAM])
    pairing = rng.standard_normal((n, 2))
    desc_noise = rng.standard_normal((n, db.dimension))
    vel_noise = rng.standard_normal((n, 2))

    paired_rows = db.nearest_indices(truth + cfg.pairing_noise_sigma * pairing)
    queries = db.descriptors.matrix[paired_rows] + cfg.descriptor_noise_sigma * desc_noise

    vel = np.zeros((n, 2))
    vel[1:] = np.diff(truth, axis=0) / dt + velocity_noise_sigma * vel_noise[1:]

    return GroundRun(
        truth=tuple(TimedPose(i * dt, Position2(float(x), float(y))) for i, (x, y) in enumerate(truth)),
        velocities=tuple(Velocity2(float(vx), float(vy)) for vx, vy in vel),
        queries=tuple(Descriptor(q) for q in queries),
        paired_ids=tuple(int(i) for i in db.ids[paired_rows]),
        dt=dt,
    )


def dead_reckon(start: Position2, velocities, dt: float) -> list[Position2]:
    """Positions ``start + sum(v[:j+1]) * dt`` for each ``j``."""
    xy = dead_reckon_xy(start, velocities, dt)
    return [Position2(float(x), float(y)) for x, y in xy]


def dead_reckon_xy(start: Position2, velocities, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = np.asarray([[u.vx, u.vy] if isinstance(u, Velocity2) else u for u in velocities], dtype=float).reshape(-1, 2)
    return np.array([start.x, start.y]) + np.cumsum(v * dt, axis=0)


def street_route(cfg: WorldConfig, length: float, block: float = 100.0, margin: float = 50.0, seed: int | None = None) -> np.ndarray:
    """Random drive on a Manhattan street lattice covering at least ``length`` meters.

    Streets run every ``block`` meters; the route turns at intersections and
    never leaves the ``margin`` band inside the world edges or U-turns.
    """
    rng = np.random.default_rng([cfg.seed if seed is None else seed, _ROUTE_STREAM])
    lo, hi = margin, cfg.area_size - margin
    if hi - lo < block:
        raise ValueError("world too small for the requested street block and margin")
    lines = np.arange(lo, hi + 1e-9, block)
    pos = np.array([rng.choice(lines), rng.choice(lines)])
    heading = None
    dirs = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
    waypoints = [pos.copy()]
    travelled = 0.0
    while travelled < length:
        options = []
        for d in dirs:
            if heading is not None and np.all(d == -heading):
                continue
            nxt = pos + d * block
            if lo - 1e-9 <= nxt[0] <= hi + 1e-9 and lo - 1e-9 <= nxt[1] <= hi + 1e-9:
                options.append(d)
        d = options[rng.integers(len(options))]
        blocks = int(rng.integers(1, 4))
        for _ in range(blocks):
            nxt = pos + d * block
            if not (lo - 1e-9 <= nxt[0] <= hi + 1e-9 and lo - 1e-9 <= nxt[1] <= hi + 1e-9):
                break
            pos = nxt
            travelled += block
        waypoints.append(pos.copy())
        heading = d
    return np.array(waypoints)
