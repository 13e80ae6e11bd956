"""Experiment runner: repeated filter runs, strategy comparison and sweeps."""

from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Union

import numpy as np

from .aerial_db import AerialDatabase
from .filter import (
    FilterConfig,
    Strategy,
    init_from_retrieval,
    init_gaussian,
    step,
)
from .geo import position_errors
from .ingest import DatasetManifest, load_dataset
from .retrieval import DEFAULT_FRACTIONS, RecallCurve, measurement_from_retrievals, recall_curve, true_match_ranks
from .sim import GroundRun, WorldConfig, dead_reckon_xy, generate_ground_run, generate_world, street_route

log = logging.getLogger(__name__)

INIT_MODES = ("known", "retrieval")

_scenario_tokens = itertools.count()


@dataclass(frozen=True)
class ExperimentConfig:
    world: Union[WorldConfig, DatasetManifest] = field(default_factory=WorldConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    runs: int = 5
    init_mode: str = "known"
    velocity_noise_sigma: float = 1.0
    num_steps: int = 800
    speed: float = 5.0
    street_block: float = 100.0
    waypoints: tuple[tuple[float, float], ...] | None = None
    recall_fractions: tuple[float, ...] = DEFAULT_FRACTIONS

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")
        if self.velocity_noise_sigma < 0:
            raise ValueError("velocity_noise_sigma must be non-negative")
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["world_kind"] = "dataset" if isinstance(self.world, DatasetManifest) else "synthetic"
        d["filter"]["strategy"] = self.filter.strategy.value
        return d


@dataclass
class Scenario:
    """A database plus one ground run; held fixed across the filter runs of an experiment."""

    db: AerialDatabase
    run: GroundRun
    token: int = field(default_factory=lambda: next(_scenario_tokens))

    @property
    def truth(self) -> np.ndarray:
        return self.run.truth_xy

    def cache_key(self, t: int):
        return (self.token, t)

    def recall_ranks(self) -> np.ndarray:
        # Warm the shared distance cache so the filter reuses it.
        for t, q in enumerate(self.run.queries):
            self.db.descriptor_distances(q, self.cache_key(t))
        return true_match_ranks(self.db, self.run.query_pairs())


@dataclass
class RunTrace:
    run: int
    seed: tuple[int, int]
    steps: np.ndarray
    truth: np.ndarray
    dead_reckoning: np.ndarray
    estimate: np.ndarray
    degenerate_steps: int = 0

    @property
    def err_dr(self) -> np.ndarray:
        return position_errors(self.dead_reckoning, self.truth)

    @property
    def err_est(self) -> np.ndarray:
        return position_errors(self.estimate, self.truth)


@dataclass
class ExperimentReport:
    """Per-run traces plus pooled statistics over every step of every run."""

    config: dict
    runs: list[RunTrace]
    recall: RecallCurve | None = None

    def _pooled(self, attr: str) -> np.ndarray:
        if not self.runs:
            return np.zeros(0)
        return np.concatenate([getattr(r, attr) for r in self.runs])

    @property
    def mean_error(self) -> float:
        return float(np.mean(self._pooled("err_est"))) if self.runs else float("nan")

    @property
    def std_error(self) -> float:
        return float(np.std(self._pooled("err_est"))) if self.runs else float("nan")

    @property
    def mean_dr_error(self) -> float:
        return float(np.mean(self._pooled("err_dr"))) if self.runs else float("nan")

    @property
    def std_dr_error(self) -> float:
        return float(np.std(self._pooled("err_dr"))) if self.runs else float("nan")

    def recall_at(self, fraction: float) -> float:
        if self.recall is None:
            raise ValueError("report has no recall curve")
        return self.recall.at(fraction)

    def summary(self) -> dict:
        out = {
            "runs": len(self.runs),
            "steps_per_run": [len(r.steps) for r in self.runs],
            "err_est_mean": self.mean_error,
            "err_est_std": self.std_error,
            "err_dr_mean": self.mean_dr_error,
            "err_dr_std": self.std_dr_error,
            "degenerate_steps": [r.degenerate_steps for r in self.runs],
        }
        if self.recall is not None:
            out["recall"] = [list(p) for p in self.recall.points]
        return out


def build_scenario(cfg: ExperimentConfig) -> Scenario:
    if isinstance(cfg.world, DatasetManifest):
        db, run = load_dataset(cfg.world, cfg.velocity_noise_sigma, seed=cfg.filter.seed)
        return Scenario(db, run)
    world = cfg.world
    db = generate_world(world)
    if cfg.waypoints is not None:
        waypoints = np.asarray(cfg.waypoints, dtype=float)
    else:
        waypoints = street_route(world, cfg.num_steps * cfg.speed, block=cfg.street_block)
    run = generate_ground_run(world, db, waypoints, cfg.speed, cfg.velocity_noise_sigma)
    if len(run) > cfg.num_steps + 1:
        run = GroundRun(
            run.truth[: cfg.num_steps + 1],
            run.velocities[: cfg.num_steps + 1],
            run.queries[: cfg.num_steps + 1],
            run.paired_ids[: cfg.num_steps + 1],
            run.dt,
        )
    return Scenario(db, run)


def run_filter(scenario: Scenario, fcfg: FilterConfig, init_mode: str, run_index: int = 0) -> RunTrace:
    """Track the scenario's ground run once; errors are recorded from step 1 on."""
    db, gr = scenario.db, scenario.run
    truth = gr.truth_xy
    start = gr.truth[0].position
    seed = (fcfg.seed, run_index)
    rng = np.random.default_rng(list(seed))
    if init_mode == "known":
        ps = init_gaussian(fcfg, start, rng)
    else:
        ps = init_from_retrieval(fcfg, db, gr.queries[0], rng)

    n = len(gr)
    est = np.empty((n - 1, 2))
    degenerate = 0
    for t in range(1, n):
        key = scenario.cache_key(t)
        if fcfg.strategy is Strategy.PPF:
            top = db.top_k_indices(gr.queries[t], min(fcfg.top_k, len(db)), key)
            obs = measurement_from_retrievals([db.entries[i] for i in top], fcfg.bandwidth)
        else:
            obs = gr.queries[t]
        ps, e = step(ps, gr.velocities[t], gr.dt, obs, fcfg, db, key)
        degenerate += ps.degenerate
        est[t - 1] = (e.x, e.y)
    dr = dead_reckon_xy(start, gr.velocities, gr.dt)
    return RunTrace(
        run=run_index,
        seed=seed,
        steps=np.arange(1, n),
        truth=truth[1:],
        dead_reckoning=dr[1:],
        estimate=est,
        degenerate_steps=int(degenerate),
    )


def run_experiment(cfg: ExperimentConfig, scenario: Scenario | None = None) -> ExperimentReport:
    """Run ``cfg.runs`` filter passes over one fixed scenario.

    Only the filter is re-seeded between runs (seed ``(filter.seed, run)``);
    the world, route, velocity noise and queries stay fixed.
    """
    if scenario is None:
        scenario = build_scenario(cfg)
    ranks = scenario.recall_ranks()
    curve = recall_curve(scenario.db, fractions=cfg.recall_fractions, ranks=ranks)
    traces = [run_filter(scenario, cfg.filter, cfg.init_mode, r) for r in range(cfg.runs)]
    report = ExperimentReport(cfg.to_dict(), traces, curve)
    log.info(
        "%s: err %.2f +- %.2f m, dead reckoning %.2f +- %.2f m",
        cfg.filter.strategy.value,
        report.mean_error,
        report.std_error,
        report.mean_dr_error,
        report.std_dr_error,
    )
    return report


@dataclass
class StrategyComparison:
    ppf: ExperimentReport
    capf: ExperimentReport

    @property
    def std_ratio(self) -> float:
        """CAPF error std over PPF error std."""
        return self.capf.std_error / self.ppf.std_error if self.ppf.std_error > 0 else float("nan")

    def summary(self) -> dict:
        return {
            "ppf": {"mean": self.ppf.mean_error, "std": self.ppf.std_error},
            "capf": {"mean": self.capf.mean_error, "std": self.capf.std_error},
            "dead_reckoning": {"mean": self.capf.mean_dr_error, "std": self.capf.std_dr_error},
            "std_ratio_capf_over_ppf": self.std_ratio,
        }


def compare_strategies(cfg: ExperimentConfig) -> StrategyComparison:
    """PPF and CAPF over the same scenario and filter seeds."""
    scenario = build_scenario(cfg)
    reports = {
        s: run_experiment(replace(cfg, filter=replace(cfg.filter, strategy=s)), scenario)
        for s in (Strategy.PPF, Strategy.CAPF)
    }
    return StrategyComparison(reports[Strategy.PPF], reports[Strategy.CAPF])


WORLD_KNOBS = {"descriptor_noise_sigma": float, "alias_groups": int}
FILTER_KNOBS = {"top_k": int, "bandwidth": float, "M": int, "num_particles": int}
RUN_KNOBS = {"velocity_noise_sigma": float}
SWEEP_KNOBS = (*WORLD_KNOBS, *FILTER_KNOBS, *RUN_KNOBS)


@dataclass
class SweepRow:
    value: float
    report: ExperimentReport

    def as_record(self, parameter: str) -> dict:
        r = self.report
        return {
            parameter: self.value,
            "recall_at_1pct": r.recall_at(0.01),
            "recall_at_10pct": r.recall_at(0.1),
            "err_est_mean": r.mean_error,
            "err_est_std": r.std_error,
            "err_dr_mean": r.mean_dr_error,
            "err_dr_std": r.std_dr_error,
        }


def with_knob(cfg: ExperimentConfig, parameter: str, value) -> ExperimentConfig:
    if parameter in WORLD_KNOBS:
        if isinstance(cfg.world, DatasetManifest):
            raise ValueError(f"{parameter} only applies to synthetic worlds")
        return replace(cfg, world=replace(cfg.world, **{parameter: WORLD_KNOBS[parameter](value)}))
    if parameter in FILTER_KNOBS:
        name = "num_particles" if parameter == "M" else parameter
        return replace(cfg, filter=replace(cfg.filter, **{name: FILTER_KNOBS[parameter](value)}))
    if parameter in RUN_KNOBS:
        return replace(cfg, **{parameter: RUN_KNOBS[parameter](value)})
    raise ValueError(f"unknown sweep parameter {parameter!r}; valid knobs: {', '.join(SWEEP_KNOBS)}")


def sweep(cfg: ExperimentConfig, parameter: str, values) -> list[SweepRow]:
    """One report per value of ``parameter``, all sharing the base seeds."""
    if parameter not in SWEEP_KNOBS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; valid knobs: {', '.join(SWEEP_KNOBS)}")
    return [SweepRow(v, run_experiment(with_knob(cfg, parameter, v))) for v in values]

