"""Dataset ingestion (descriptor tables, trajectories, KML) and report output.

Descriptor tables are UTF-8 comma-separated text with a header of either
``id,x,y,d0,...,d{D-1}`` (local east/north meters) or
``id,lat,lon,d0,...,d{D-1}`` (degrees).  In a query table the ``id`` of each
row is the id of the aerial entry it was captured paired with, and its
position columns are the query's own geotag.
"""

from __future__ import annotations

import csv
import json
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aerial_db import AerialDatabase
from .descriptor import Descriptor, DescriptorSet, DimensionMismatchError
from .geo import GeoCoordinate, LocalFrame, Position2, TimedPose, Velocity2, geo_to_local


class EmptyDatasetError(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None) -> None:
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


# -- KML ---------------------------------------------------------------------

_COORDS = re.compile(
    r"<(?:[\w.-]+:)?coordinates\b[^>]*?(?:/>|>(.*?)</(?:[\w.-]+:)?coordinates\s*>)",
    re.DOTALL,
)


def _line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def parse_kml_coordinates(text: str) -> list[GeoCoordinate]:
    """All ``lon,lat[,alt]`` tuples from every ``coordinates`` element, in document order.

    Altitude is discarded.
    """
    matches = list(_COORDS.finditer(text))
    if not matches:
        raise EmptyDatasetError("document has no coordinates element")
    out: list[GeoCoordinate] = []
    for m in matches:
        body = m.group(1) or ""
        base = m.start(1) if m.group(1) is not None else m.end()
        for tok in re.finditer(r"\S+", body):
            token = tok.group()
            line, col = _line_col(text, base + tok.start())
            fields = token.split(",")
            if not 2 <= len(fields) <= 3:
                raise ParseError(f"expected lon,lat[,alt] but got {token!r}", line, col)
            try:
                values = [float(f) for f in fields]
            except ValueError:
                raise ParseError(f"non-numeric coordinate tuple {token!r}", line, col) from None
            try:
                out.append(GeoCoordinate(lat=values[1], lon=values[0]))
            except ValueError as exc:
                raise ParseError(f"invalid coordinate {token!r}: {exc}", line, col) from None
    if not out:
        raise EmptyDatasetError("coordinates elements are empty")
    return out


# -- descriptor tables -----------------------------------------------------

LOCAL = "local"
GEO = "geo"


@dataclass(frozen=True)
class DescriptorTable:
    ids: np.ndarray
    coords: np.ndarray
    """``(n, 2)``: ``x, y`` for local tables, ``lat, lon`` for geodetic ones."""
    descriptors: DescriptorSet
    kind: str = LOCAL

    def __len__(self) -> int:
        return len(self.ids)

    def positions(self, frame: LocalFrame | None = None) -> np.ndarray:
        if self.kind == LOCAL:
            return self.coords
        if frame is None:
            raise ValueError("a geodetic table needs a LocalFrame to produce planar positions")
        pts = [geo_to_local(frame, GeoCoordinate(float(a), float(o))) for a, o in self.coords]
        return np.array([[p.x, p.y] for p in pts], dtype=float).reshape(-1, 2)

    def to_database(self, frame: LocalFrame | None = None) -> AerialDatabase:
        return AerialDatabase.from_arrays(self.ids, self.positions(frame), self.descriptors.matrix)


def _header_kind(header: list[str], line: int) -> tuple[str, int]:
    cols = [c.strip() for c in header]
    if len(cols) < 4 or cols[0] != "id":
        raise ParseError("header must start with id and have at least one descriptor column", line)
    if cols[1:3] == ["x", "y"]:
        kind = LOCAL
    elif cols[1:3] == ["lat", "lon"]:
        kind = GEO
    else:
        raise ParseError(f"expected position columns x,y or lat,lon, got {cols[1]},{cols[2]}", line)
    dims = cols[3:]
    for j, c in enumerate(dims):
        if c != f"d{j}":
            raise ParseError(f"descriptor column {j} must be named d{j}, got {c!r}", line)
    return kind, len(dims)


def load_descriptor_table(path, expected_dim: int | None = None) -> DescriptorTable:
    """Read a descriptor table, validating shape, numbers and id uniqueness."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = None
        for row in reader:
            if row:
                header = row
                break
        if header is None:
            raise EmptyDatasetError(f"{path} is empty")
        kind, dim = _header_kind(header, reader.line_num)
        if expected_dim is not None and dim != expected_dim:
            raise DimensionMismatchError(f"{path}: header has {dim} descriptor columns, expected {expected_dim}")
        ids: list[int] = []
        seen: dict[int, int] = {}
        coords: list[list[float]] = []
        desc: list[list[float]] = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            line = reader.line_num
            if len(row) != dim + 3:
                raise ParseError(f"expected {dim + 3} fields, got {len(row)}", line)
            try:
                rid = int(row[0])
            except ValueError:
                raise ParseError(f"id {row[0]!r} is not an integer", line) from None
            if rid in seen:
                raise ParseError(f"duplicate id {rid} (first on line {seen[rid]})", line)
            seen[rid] = line
            try:
                values = [float(c) for c in row[1:]]
            except ValueError:
                bad = next(c for c in row[1:] if not _is_float(c))
                raise ParseError(f"non-numeric cell {bad!r}", line) from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError("non-finite value", line)
            ids.append(rid)
            coords.append(values[:2])
            desc.append(values[2:])
    if not ids:
        raise EmptyDatasetError(f"{path} has no data rows")
    return DescriptorTable(
        np.array(ids, dtype=np.int64),
        np.array(coords, dtype=float),
        DescriptorSet.from_matrix(np.array(desc, dtype=float)),
        kind,
    )


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_descriptor_table(path, ids, coords, descriptors, kind: str = LOCAL) -> None:
    """Write a table that :func:`load_descriptor_table` reads back losslessly."""
    if kind not in (LOCAL, GEO):
        raise ValueError(f"kind must be {LOCAL!r} or {GEO!r}")
    desc = descriptors.matrix if isinstance(descriptors, DescriptorSet) else np.asarray(descriptors, dtype=float)
    coords = np.asarray(coords, dtype=float)
    pos_cols = ["x", "y"] if kind == LOCAL else ["lat", "lon"]
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", *pos_cols, *(f"d{j}" for j in range(desc.shape[1]))])
        for i, c, d in zip(ids, coords, desc):
            w.writerow([int(i), *(repr(float(v)) for v in c), *(repr(float(v)) for v in d)])


# -- trajectories and datasets ---------------------------------------------------


def load_trajectory(path, frame: LocalFrame | None = None, dt: float = 1.0) -> list[TimedPose]:
    """Truth trajectory from a KML file or a ``t,x,y`` / ``t,lat,lon`` CSV.

    KML carries no timestamps; its points are spaced ``dt`` seconds apart.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".kml":
        if frame is None:
            raise ValueError("KML trajectories need a LocalFrame")
        geo = parse_kml_coordinates(text)
        return [TimedPose(i * dt, geo_to_local(frame, g)) for i, g in enumerate(geo)]

    rows = [r for r in csv.reader(text.splitlines()) if r]
    if not rows:
        raise EmptyDatasetError(f"{path} is empty")
    header = [c.strip() for c in rows[0]]
    if header not in (["t", "x", "y"], ["t", "lat", "lon"]):
        raise ParseError("trajectory header must be t,x,y or t,lat,lon", 1)
    geodetic = header[1] == "lat"
    if geodetic and frame is None:
        raise ValueError("geodetic trajectories need a LocalFrame")
    poses = []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", n)
        try:
            t, a, b = (float(c) for c in row)
        except ValueError:
            raise ParseError(f"non-numeric row {row!r}", n) from None
        p = geo_to_local(frame, GeoCoordinate(a, b)) if geodetic else Position2(a, b)
        if poses and not t > poses[-1].t:
            raise ParseError(f"timestamps must increase strictly (t={t})", n)
        poses.append(TimedPose(t, p))
    if not poses:
        raise EmptyDatasetError(f"{path} has no data rows")
    return poses


@dataclass(frozen=True)
class DatasetManifest:
    aerial_table_path: str
    query_table_path: str
    trajectory_path: str
    descriptor_dim: int
    frame_origin: GeoCoordinate

    @property
    def frame(self) -> LocalFrame:
        return LocalFrame(self.frame_origin)


def load_dataset(manifest: DatasetManifest, velocity_noise_sigma: float, seed: int = 0):
    """Aerial database and ground run for a real dataset.

    Velocities are simulated from the truth trajectory and corrupted with
    per-axis Gaussian noise; there is one query row per trajectory point.
    """
    from .sim import GroundRun

    frame = manifest.frame
    aerial = load_descriptor_table(manifest.aerial_table_path, manifest.descriptor_dim)
    queries = load_descriptor_table(manifest.query_table_path, manifest.descriptor_dim)
    poses = load_trajectory(manifest.trajectory_path, frame)
    if len(poses) != len(queries):
        raise ValueError(f"trajectory has {len(poses)} points but the query table has {len(queries)} rows")
    db = aerial.to_database(frame)
    for qid in queries.ids:
        db.index_of(int(qid))

    truth = np.array([[p.position.x, p.position.y] for p in poses])
    times = np.array([p.t for p in poses])
    rng = np.random.default_rng([seed, 7])
    vel = np.zeros_like(truth)
    if len(truth) > 1:
        dts = np.diff(times)[:, None]
        vel[1:] = np.diff(truth, axis=0) / dts + velocity_noise_sigma * rng.standard_normal((len(truth) - 1, 2))
    dt = float(np.median(np.diff(times))) if len(times) > 1 else 1.0
    if len(times) > 1 and not np.allclose(np.diff(times), dt):
        raise ValueError("trajectory timestamps must be evenly spaced")
    run = GroundRun(
        truth=tuple(poses),
        velocities=tuple(Velocity2(float(a), float(b)) for a, b in vel),
        queries=tuple(Descriptor(d) for d in queries.descriptors.matrix),
        paired_ids=tuple(int(i) for i in queries.ids),
        dt=dt,
    )
    return db, run


# -- reports -----------------------------------------------------------------

STEP_COLUMNS = ("run", "step", "truth_x", "truth_y", "dr_x", "dr_y", "est_x", "est_y", "err_dr", "err_est")
STEPS_FILE = "steps.csv"
SUMMARY_FILE = "summary.json"
RECALL_FILE = "recall.csv"


def write_run_report(report, path) -> Path:
    """Write ``steps.csv``, ``summary.json`` and ``recall.csv`` into directory ``path``.

    Floats are written with ``repr`` so that reading them back is exact.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    with (out / STEPS_FILE).open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(STEP_COLUMNS)
        rows = 0
        for r in report.runs:
            err_dr, err_est = r.err_dr, r.err_est
            for i, s in enumerate(r.steps):
                w.writerow(
                    [
                        r.run,
                        int(s),
                        *(repr(float(v)) for v in r.truth[i]),
                        *(repr(float(v)) for v in r.dead_reckoning[i]),
                        *(repr(float(v)) for v in r.estimate[i]),
                        repr(float(err_dr[i])),
                        repr(float(err_est[i])),
                    ]
                )
                rows += 1
    if rows == 0:
        warnings.warn("report has no steps; wrote header-only steps.csv", stacklevel=2)
    summary = {"config": report.config, "summary": report.summary()}
    (out / SUMMARY_FILE).write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")
    if report.recall is not None:
        with (out / RECALL_FILE).open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["k_fraction", "recall"])
            for frac, rec in report.recall.points:
                w.writerow([repr(frac), repr(rec)])
    return out


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def load_run_report(path) -> dict:
    """Read back a report directory: ``steps`` as an ``(n, 10)`` array plus the summary."""
    out = Path(path)
    with (out / STEPS_FILE).open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != STEP_COLUMNS:
            raise ParseError(f"unexpected steps header {header}", 1)
        steps = np.array([[float(c) for c in row] for row in reader if row], dtype=float).reshape(-1, len(STEP_COLUMNS))
    summary = json.loads((out / SUMMARY_FILE).read_text())
    return {"steps": steps, "columns": STEP_COLUMNS, **summary}
