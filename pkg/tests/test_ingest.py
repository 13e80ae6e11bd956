from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from crossview_pf.descriptor import DescriptorSet, DimensionMismatchError
from crossview_pf.experiments import ExperimentReport, RunTrace
from crossview_pf.geo import GeoCoordinate, LocalFrame, local_to_geo, Position2
from crossview_pf.ingest import (
    DatasetManifest,
    EmptyDatasetError,
    ParseError,
    load_dataset,
    load_descriptor_table,
    load_run_report,
    load_trajectory,
    parse_kml_coordinates,
    write_descriptor_table,
    write_run_report,
)

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


# -- KML ---------------------------------------------------------------------


def test_kml_two_tuples_swap_lon_lat():
    doc = "<kml><coordinates>151.2,-33.8,0 151.3,-33.9,0</coordinates></kml>"
    assert parse_kml_coordinates(doc) == [GeoCoordinate(-33.8, 151.2), GeoCoordinate(-33.9, 151.3)]


def test_kml_ten_coordinates_in_document_order():
    coords = parse_kml_coordinates(fixture_text("route10.kml"))
    assert len(coords) == 10
    for i, c in enumerate(coords):
        assert c.lat == pytest.approx(-33.8 - 0.0001 * i, abs=1e-12)
        assert c.lon == pytest.approx(151.2 + 0.0001 * i, abs=1e-12)


def test_kml_namespaced_and_self_closing_elements():
    doc = "<kml:coordinates/><kml:coordinates>1,2</kml:coordinates>"
    assert parse_kml_coordinates(doc) == [GeoCoordinate(2.0, 1.0)]


@pytest.mark.parametrize("name", ["empty_coordinates.kml", "no_coordinates.kml"])
def test_kml_without_tuples_is_an_empty_dataset(name):
    with pytest.raises(EmptyDatasetError):
        parse_kml_coordinates(fixture_text(name))


def test_kml_bad_token_is_named_with_its_position():
    with pytest.raises(ParseError, match="abc,1.0") as info:
        parse_kml_coordinates(fixture_text("bad_token.kml"))
    assert info.value.line == 3
    assert info.value.column == 15


def test_kml_tuple_with_one_field_is_a_parse_error():
    with pytest.raises(ParseError, match="151.3"):
        parse_kml_coordinates(fixture_text("short_tuple.kml"))


def test_kml_out_of_range_latitude_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_kml_coordinates("<coordinates>10,95</coordinates>")


# -- descriptor tables -----------------------------------------------------


def test_three_row_table():
    table = load_descriptor_table(FIXTURES / "table3.csv", expected_dim=4)
    assert table.ids.tolist() == [10, 11, 12]
    assert table.coords.tolist() == [[0.0, 0.0], [20.0, 0.0], [40.5, -3.25]]
    assert table.descriptors.dimension == 4
    assert table.descriptors[2].values.tolist() == [0.0, 0.0, 1.0, 0.5]
    db = table.to_database()
    assert db.nearest_by_position(Position2(39, -2)).id == 12


def test_table_round_trip_is_lossless(tmp_path):
    rng = np.random.default_rng(0)
    ids = np.arange(50) * 3
    coords = rng.uniform(-1e4, 1e4, size=(50, 2))
    desc = rng.standard_normal((50, 7)) * 10.0 ** rng.integers(-8, 8, size=(50, 7))
    path = tmp_path / "t.csv"
    write_descriptor_table(path, ids, coords, DescriptorSet.from_matrix(desc))
    back = load_descriptor_table(path)
    assert back.ids.tolist() == ids.tolist()
    assert np.max(np.abs(back.coords - coords)) <= 1e-9
    assert np.max(np.abs(back.descriptors.matrix - desc)) <= 1e-9
    # repr() formatting actually makes it exact.
    assert np.array_equal(back.descriptors.matrix, desc)


def test_geodetic_table_converts_through_the_frame(tmp_path):
    frame = LocalFrame(GeoCoordinate(-33.8, 151.2))
    pts = [Position2(0, 0), Position2(100, -50)]
    geo = [local_to_geo(frame, p) for p in pts]
    path = tmp_path / "g.csv"
    write_descriptor_table(path, [1, 2], [[g.lat, g.lon] for g in geo], np.eye(2), kind="geo")
    table = load_descriptor_table(path)
    assert table.kind == "geo"
    np.testing.assert_allclose(table.positions(frame), [[0, 0], [100, -50]], atol=1e-6)
    with pytest.raises(ValueError):
        table.positions()


def test_short_row_errors_at_that_row():
    with pytest.raises(ParseError, match="line 3") as info:
        load_descriptor_table(FIXTURES / "ragged.csv")
    assert info.value.line == 3


def test_non_numeric_cell_names_row_and_value():
    with pytest.raises(ParseError, match="zz") as info:
        load_descriptor_table(FIXTURES / "nonnumeric.csv")
    assert info.value.line == 3


def test_duplicate_id_errors_at_second_occurrence():
    with pytest.raises(ParseError, match="duplicate id 1") as info:
        load_descriptor_table(FIXTURES / "duplicate_ids.csv")
    assert info.value.line == 4


@pytest.mark.parametrize("name", ["empty.csv", "header_only.csv"])
def test_empty_table_is_an_empty_dataset(name):
    with pytest.raises(EmptyDatasetError):
        load_descriptor_table(FIXTURES / name)


def test_expected_dimension_is_checked_from_header():
    with pytest.raises(DimensionMismatchError):
        load_descriptor_table(FIXTURES / "table3.csv", expected_dim=5)


def test_bad_header_is_rejected(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("id,east,north,d0\n1,0,0,1\n")
    with pytest.raises(ParseError):
        load_descriptor_table(p)


# -- trajectories and datasets ---------------------------------------------------


def test_kml_trajectory_is_spaced_by_dt():
    frame = LocalFrame(GeoCoordinate(-33.8, 151.2))
    poses = load_trajectory(FIXTURES / "route10.kml", frame, dt=2.0)
    assert [p.t for p in poses] == [2.0 * i for i in range(10)]
    assert poses[0].position.x == pytest.approx(0.0, abs=1e-9)
    assert poses[1].position.x > 0 and poses[1].position.y < 0


def test_csv_trajectory_rejects_non_increasing_time(tmp_path):
    p = tmp_path / "traj.csv"
    p.write_text("t,x,y\n0,0,0\n1,1,0\n1,2,0\n")
    with pytest.raises(ParseError, match="increase"):
        load_trajectory(p)


def _write_dataset(tmp_path, n_query=4, dim=3):
    rng = np.random.default_rng(1)
    aerial = rng.standard_normal((5, dim))
    write_descriptor_table(tmp_path / "aerial.csv", range(5), [[i * 20.0, 0.0] for i in range(5)], aerial)
    write_descriptor_table(tmp_path / "query.csv", range(n_query), [[i * 20.0, 0.0] for i in range(n_query)], aerial[:n_query])
    (tmp_path / "traj.csv").write_text("t,x,y\n" + "".join(f"{i},{i * 20.0},0\n" for i in range(4)))
    return DatasetManifest(
        str(tmp_path / "aerial.csv"),
        str(tmp_path / "query.csv"),
        str(tmp_path / "traj.csv"),
        dim,
        GeoCoordinate(0.0, 0.0),
    )


def test_load_dataset_builds_database_and_run(tmp_path):
    db, run = load_dataset(_write_dataset(tmp_path), velocity_noise_sigma=0.0)
    assert len(db) == 5
    assert len(run) == 4
    assert run.paired_ids == (0, 1, 2, 3)
    assert run.velocity_xy[1:].tolist() == [[20.0, 0.0]] * 3


def test_load_dataset_rejects_length_and_dimension_mismatch(tmp_path):
    with pytest.raises(ValueError, match="trajectory"):
        load_dataset(_write_dataset(tmp_path, n_query=3), 0.0)
    m = _write_dataset(tmp_path)
    bad = DatasetManifest(m.aerial_table_path, m.query_table_path, m.trajectory_path, 4, m.frame_origin)
    with pytest.raises(DimensionMismatchError):
        load_dataset(bad, 0.0)


# -- reports -----------------------------------------------------------------


def _report(n_steps: int) -> ExperimentReport:
    truth = np.column_stack([np.arange(n_steps, dtype=float), np.zeros(n_steps)])
    trace = RunTrace(
        run=0,
        seed=(0, 0),
        steps=np.arange(1, n_steps + 1),
        truth=truth,
        dead_reckoning=truth + [0.1, 0.2],
        estimate=truth - [1.0 / 3.0, 0.0],
    )
    return ExperimentReport({"note": "unit"}, [trace])


def test_two_step_report_has_two_rows_and_a_summary(tmp_path):
    out = write_run_report(_report(2), tmp_path / "r")
    rows = list(csv.reader((out / "steps.csv").open()))
    assert rows[0] == ["run", "step", "truth_x", "truth_y", "dr_x", "dr_y", "est_x", "est_y", "err_dr", "err_est"]
    assert len(rows) == 3
    loaded = load_run_report(out)
    s = loaded["summary"]
    assert s["err_est_mean"] == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert s["err_est_std"] == pytest.approx(0.0, abs=1e-12)


def test_report_round_trip_within_tolerance(tmp_path):
    report = _report(5)
    loaded = load_run_report(write_run_report(report, tmp_path / "r"))
    steps = loaded["steps"]
    r = report.runs[0]
    np.testing.assert_allclose(steps[:, 2:4], r.truth, atol=1e-9)
    np.testing.assert_allclose(steps[:, 4:6], r.dead_reckoning, atol=1e-9)
    np.testing.assert_allclose(steps[:, 6:8], r.estimate, atol=1e-9)
    # Aggregates recompute from the emitted per-step rows.
    assert np.mean(steps[:, 9]) == pytest.approx(loaded["summary"]["err_est_mean"], abs=1e-9)
    assert np.std(steps[:, 8]) == pytest.approx(loaded["summary"]["err_dr_std"], abs=1e-9)


def test_empty_report_writes_header_only_with_warning(tmp_path):
    with pytest.warns(UserWarning, match="no steps"):
        out = write_run_report(ExperimentReport({}, []), tmp_path / "e")
    lines = (out / "steps.csv").read_text().splitlines()
    assert len(lines) == 1


def test_unwritable_report_path_errors(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        write_run_report(_report(1), blocker / "sub")
