"""Command line entry point: ``crossview-pf {run,compare,sweep,ingest-check}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, load_config
from .experiments import SWEEP_KNOBS, ExperimentConfig, compare_strategies, run_experiment, sweep
from .filter import Strategy
from .ingest import (
    DatasetManifest,
    load_dataset,
    load_descriptor_table,
    load_trajectory,
    parse_kml_coordinates,
    write_run_report,
)
from .sim import WorldConfig

log = logging.getLogger("crossview_pf")


def _parse_sweep(text: str) -> tuple[str, list[str]]:
    name, sep, values = text.partition("=")
    if not sep or not values:
        raise ConfigError(f"--sweep expects NAME=v1,v2,..., got {text!r}")
    name = name.strip()
    if name not in SWEEP_KNOBS:
        raise ConfigError(f"unknown sweep parameter {name!r}; valid knobs: {', '.join(SWEEP_KNOBS)}")
    return name, [v.strip() for v in values.split(",") if v.strip()]


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        world = cfg.world
        if isinstance(world, WorldConfig):
            world = replace(world, seed=args.seed)
        cfg = replace(cfg, world=world, filter=replace(cfg.filter, seed=args.seed))
    if getattr(args, "strategy", None):
        cfg = replace(cfg, filter=replace(cfg.filter, strategy=Strategy(args.strategy)))
    if args.runs is not None:
        cfg = replace(cfg, runs=args.runs)
    if args.init is not None:
        cfg = replace(cfg, init_mode=args.init)
    return cfg


def _announce(cfg: ExperimentConfig) -> None:
    seed = cfg.filter.seed
    world_seed = cfg.world.seed if isinstance(cfg.world, WorldConfig) else None
    print(f"seed: filter={seed} world={world_seed}")
    print("resolved config:")
    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True, default=str))


def _print_report(label: str, report) -> None:
    print(
        f"{label}: localization error {report.mean_error:.2f} +- {report.std_error:.2f} m, "
        f"dead reckoning {report.mean_dr_error:.2f} +- {report.std_dr_error:.2f} m, "
        f"recall@1% {report.recall_at(0.01):.4f}, recall@10% {report.recall_at(0.1):.4f}"
    )


def cmd_run(args) -> None:
    cfg = _resolve(args)
    _announce(cfg)
    report = run_experiment(cfg)
    _print_report(cfg.filter.strategy.value, report)
    if args.out:
        write_run_report(report, args.out)
        print(f"wrote {args.out}")


def cmd_compare(args) -> None:
    cfg = _resolve(args)
    _announce(cfg)
    cmp = compare_strategies(cfg)
    _print_report("ppf", cmp.ppf)
    _print_report("capf", cmp.capf)
    print(f"std ratio capf/ppf: {cmp.std_ratio:.3f}")
    if args.out:
        out = Path(args.out)
        write_run_report(cmp.ppf, out / "ppf")
        write_run_report(cmp.capf, out / "capf")
        (out / "comparison.json").write_text(json.dumps(cmp.summary(), indent=2, sort_keys=True) + "\n")
        print(f"wrote {out}")


def cmd_sweep(args) -> None:
    if not args.sweep:
        raise ConfigError("sweep needs --sweep NAME=v1,v2,...")
    name, values = _parse_sweep(args.sweep)
    cfg = _resolve(args)
    _announce(cfg)
    rows = sweep(cfg, name, values)
    records = [row.as_record(name) for row in rows]
    for rec in records:
        print(
            f"{name}={rec[name]}: recall@1% {rec['recall_at_1pct']:.4f} recall@10% {rec['recall_at_10pct']:.4f} "
            f"err {rec['err_est_mean']:.2f} +- {rec['err_est_std']:.2f} "
            f"dr {rec['err_dr_mean']:.2f} +- {rec['err_dr_std']:.2f}"
        )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "sweep.csv").open("w", newline="", encoding="utf-8") as f:
            w = csv.DictWriter(f, fieldnames=list(records[0]), lineterminator="\n")
            w.writeheader()
            for rec in records:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.items()})
        for row in rows:
            write_run_report(row.report, out / f"{name}={row.value}")
        print(f"wrote {out}")


def cmd_ingest_check(args) -> None:
    checked = 0
    if args.config:
        cfg = load_config(args.config)
        if isinstance(cfg.world, DatasetManifest):
            db, run = load_dataset(cfg.world, cfg.velocity_noise_sigma, cfg.filter.seed)
            print(f"dataset ok: {len(db)} aerial entries, {len(run)} queries, dimension {db.dimension}")
            checked += 1
    for name in args.files:
        path = Path(name)
        if path.suffix.lower() == ".kml":
            coords = parse_kml_coordinates(path.read_text(encoding="utf-8"))
            print(f"{path}: {len(coords)} coordinates")
        else:
            with path.open(encoding="utf-8") as f:
                head = f.readline().strip()
            if head.startswith("t,"):
                poses = load_trajectory(path)
                print(f"{path}: trajectory with {len(poses)} poses")
            else:
                table = load_descriptor_table(path)
                print(f"{path}: {len(table)} {table.kind} rows, dimension {table.descriptors.dimension}")
        checked += 1
    if not checked:
        raise ConfigError("ingest-check needs files or a --config with a [dataset] section")


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep, "ingest-check": cmd_ingest_check}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crossview-pf", description=__doc__)
    parser.add_argument("command", choices=list(COMMANDS))
    parser.add_argument("files", nargs="*", help="files to validate (ingest-check only)")
    parser.add_argument("--config", help="INI experiment config")
    parser.add_argument("--strategy", choices=[s.value for s in Strategy])
    parser.add_argument("--seed", type=int, help="base seed for world and filter")
    parser.add_argument("--runs", type=int)
    parser.add_argument("--out", help="output directory for reports")
    parser.add_argument("--sweep", metavar="NAME=v1,v2,...", help=f"knobs: {', '.join(SWEEP_KNOBS)}")
    parser.add_argument("--init", choices=["known", "retrieval"])
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.files and args.command != "ingest-check":
        print(f"error: {args.command} takes no positional files", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
