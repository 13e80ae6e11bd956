"""Particle filter over planar position with two cross-view weighting rules.

PPF (prediction-based) clusters the top-k retrieved geotags into one position
fix and scores particles with a Gaussian likelihood.  CAPF (compare-all)
scores each particle by the inverse descriptor distance between the query and
the aerial entry nearest that particle.  Both share prediction, stochastic
universal resampling and the weighted-mean estimate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .aerial_db import AerialDatabase
from .descriptor import Descriptor
from .geo import Position2, Velocity2
from .retrieval import Measurement, measurement_from_retrievals

UNDERFLOW_FLOOR = 1e-300
NORMALIZED_TOL = 1e-9
RETRIEVAL_INIT_SIGMA = 9.0


class Strategy(str, enum.Enum):
    PPF = "ppf"
    CAPF = "capf"


class UnnormalizedWeightsError(ValueError):
    pass


@dataclass(frozen=True)
class FilterConfig:
    num_particles: int = 200
    init_sigma: float = 4.0
    motion_noise_sigma: float = 1.0
    measurement_covariance: tuple[tuple[float, float], tuple[float, float]] = ((3.0, 0.0), (0.0, 3.0))
    strategy: Strategy = Strategy.CAPF
    top_k: int = 20
    bandwidth: float = 10.0
    epsilon: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        cov = np.asarray(self.measurement_covariance, dtype=float)
        if cov.shape != (2, 2):
            raise ValueError("measurement_covariance must be 2x2")
        object.__setattr__(self, "measurement_covariance", tuple(tuple(float(v) for v in row) for row in cov))
        if self.num_particles < 1:
            raise ValueError("num_particles must be >= 1")
        if self.init_sigma < 0 or self.motion_noise_sigma < 0:
            raise ValueError("sigmas must be non-negative")
        if cov[0, 1] != 0.0 or cov[1, 0] != 0.0 or cov[0, 0] <= 0.0 or cov[1, 1] <= 0.0:
            raise ValueError("measurement_covariance must be diagonal and positive definite")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")

    @property
    def covariance(self) -> np.ndarray:
        return np.array(self.measurement_covariance)


class Particle(NamedTuple):
    position: Position2
    weight: float


@dataclass
class ParticleSet:
    """``M`` position hypotheses and weights plus the run's random generator.

    Operations return new sets that share ``rng`` with their input, so one
    generator drives the whole run.
    """

    positions: np.ndarray
    weights: np.ndarray
    rng: np.random.Generator
    degenerate: bool = field(default=False)

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.positions) != len(self.weights):
            raise ValueError("positions and weights must have equal length")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValueError("weights must be finite and non-negative")

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def particles(self) -> list[Particle]:
        return [Particle(Position2(float(x), float(y)), float(w)) for (x, y), w in zip(self.positions, self.weights)]

    def with_weights(self, weights: np.ndarray, degenerate: bool = False) -> ParticleSet:
        return ParticleSet(self.positions, weights, self.rng, degenerate)


def init_gaussian(cfg: FilterConfig, start: Position2, rng: np.random.Generator | None = None) -> ParticleSet:
    """Isotropic Gaussian cloud of ``cfg.num_particles`` around ``start``."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    m = cfg.num_particles
    positions = np.array([start.x, start.y]) + rng.normal(0.0, 1.0, size=(m, 2)) * cfg.init_sigma
    return ParticleSet(positions, np.full(m, 1.0 / m), rng)


def init_from_retrieval(
    cfg: FilterConfig,
    db: AerialDatabase,
    first_query: Descriptor,
    rng: np.random.Generator | None = None,
    init_sigma: float = RETRIEVAL_INIT_SIGMA,
) -> ParticleSet:
    """Start the cloud at the largest-cluster mean of the first query's top-k retrievals."""
    retrievals = db.top_k_by_descriptor(first_query, cfg.top_k)
    center = measurement_from_retrievals(retrievals, cfg.bandwidth).z
    return init_gaussian(replace(cfg, init_sigma=init_sigma), center, rng)


def predict(ps: ParticleSet, v: Velocity2, dt: float, cfg: FilterConfig) -> ParticleSet:
    if dt <= 0:
        raise ValueError("dt must be positive")
    moved = ps.positions + np.array([v.vx, v.vy]) * dt
    if cfg.motion_noise_sigma > 0:
        moved = moved + ps.rng.normal(0.0, cfg.motion_noise_sigma, size=moved.shape)
    return ParticleSet(moved, ps.weights, ps.rng, ps.degenerate)


def weigh_ppf(ps: ParticleSet, z: Measurement, cov) -> ParticleSet:
    """Replace weights with the Gaussian likelihood of the position fix ``z``."""
    cov = np.asarray(cov, dtype=float)
    inv = np.linalg.inv(cov)
    r = np.array([z.z.x, z.z.y]) - ps.positions
    maha = np.einsum("ni,ij,nj->n", r, inv, r)
    return ps.with_weights(np.exp(-0.5 * maha))


def weigh_capf(ps: ParticleSet, query: Descriptor, db: AerialDatabase, epsilon: float, cache_key=None) -> ParticleSet:
    """Replace weights with ``1 / max(d, epsilon)``.

    ``d`` is the descriptor distance from ``query`` to the aerial entry whose
    geotag is nearest each particle.
    """
    dist = db.descriptor_distances(query, cache_key)
    rows = db.nearest_indices(ps.positions)
    return ps.with_weights(1.0 / np.maximum(dist[rows], epsilon))


def normalize(ps: ParticleSet) -> ParticleSet:
    """Scale weights to sum to one; fall back to uniform (flagged) on underflow."""
    total = float(ps.weights.sum())
    if not total >= UNDERFLOW_FLOOR:
        m = len(ps)
        return ps.with_weights(np.full(m, 1.0 / m), degenerate=True)
    return ps.with_weights(ps.weights / total)


def sus_indices(weights: np.ndarray, u: float, count: int | None = None) -> np.ndarray:
    """Ancestor indices for stochastic universal sampling.

    ``count`` equally spaced pointers (default: one per weight) start at offset
    ``u`` in ``[0, 1/count)``.
    """
    m = len(weights) if count is None else count
    cum = np.cumsum(weights)
    cum /= cum[-1]
    pointers = u + np.arange(m) / m
    # u + j/m can round up to exactly 1.0, which would step past the CDF onto
    # a trailing zero-weight particle; clamp to the last one with weight.
    last = int(np.flatnonzero(weights > 0)[-1])
    return np.minimum(np.searchsorted(cum, pointers, side="right"), last)


def resample_sus(ps: ParticleSet) -> ParticleSet:
    m = len(ps)
    total = float(ps.weights.sum())
    if abs(total - 1.0) > NORMALIZED_TOL:
        raise UnnormalizedWeightsError(f"weights sum to {total!r}, normalize before resampling")
    u = ps.rng.uniform(0.0, 1.0 / m)
    idx = sus_indices(ps.weights, u)
    return ParticleSet(ps.positions[idx], np.full(m, 1.0 / m), ps.rng, ps.degenerate)


def estimate(ps: ParticleSet) -> Position2:
    total = float(ps.weights.sum())
    if abs(total - 1.0) > NORMALIZED_TOL:
        raise UnnormalizedWeightsError(f"weights sum to {total!r}")
    xy = ps.weights @ ps.positions
    return Position2(float(xy[0]), float(xy[1]))


def step(
    ps: ParticleSet,
    v: Velocity2,
    dt: float,
    observation: Measurement | Descriptor,
    cfg: FilterConfig,
    db: AerialDatabase | None = None,
    cache_key=None,
) -> tuple[ParticleSet, Position2]:
    """One predict / weigh / normalize / resample / estimate cycle.

    ``observation`` is a :class:`Measurement` under PPF and the query
    :class:`Descriptor` under CAPF, which also needs ``db``.
    """
    ps = predict(ps, v, dt, cfg)
    if cfg.strategy is Strategy.PPF:
        if not isinstance(observation, Measurement):
            raise TypeError("PPF expects a Measurement observation")
        ps = weigh_ppf(ps, observation, cfg.covariance)
    else:
        if not isinstance(observation, Descriptor):
            raise TypeError("CAPF expects a query Descriptor observation")
        if db is None:
            raise ValueError("CAPF needs the aerial database")
        ps = weigh_capf(ps, observation, db, cfg.epsilon, cache_key)
    ps = normalize(ps)
    ps = resample_sus(ps)
    return ps, estimate(ps)
