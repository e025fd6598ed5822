"""
Tests for the results CSV, mirror heatmaps, tensor dump and LP file writer.
"""

import csv
import math

import numpy as np
import pytest

from simulation.geometry import Room
from simulation.trials import TrialRecord, TrialReport, summarise
from tiny_instances import desk_scenario
from writers.heatmap_writer import emit_heatmap, read_heatmap, render_heatmap_png, wall_matrices
from writers.lp_writer import LinearProgram, LPWriter, Row, parse_lp
from writers.results_writer import HEADER, ResultsWriter, emit_results, emit_sweep, read_results
from writers.tensor_writer import dump_tensor


def sample_report():
    records = [
        TrialRecord(0, 1.5e7, 2.25e7, 412.3, 0.71),
        TrialRecord(1, 1.1e7, 1.9e7, 405.0, 0.74),
        TrialRecord(2, 0.0, 1.0 / 3.0, 399.99, math.nan),
    ]
    return TrialReport(records, {"seed": "1", "regime": "four", "heuristic": "nua"})


def test_results_csv_round_trip(tmp_path):
    report = sample_report()
    path = emit_results(report, tmp_path / "out" / "results.csv")
    again = read_results(path)
    assert again.metadata == report.metadata
    assert len(again.records) == 3
    for a, b in zip(again.records[:2], report.records[:2]):
        assert a == b
    assert math.isnan(again.records[2].uniformity)
    assert again.records[2].avg_tp_bps == 1.0 / 3.0


def test_results_csv_layout(tmp_path):
    report = sample_report()
    path = emit_results(report, tmp_path / "results.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[:3] == ["# seed=1", "# regime=four", "# heuristic=nua"]
    assert lines[3] == ",".join(HEADER)
    rows = list(csv.reader(lines[4:]))
    assert [r[0] for r in rows] == ["0", "1", "2", "mean", "stderr"]
    assert float(rows[3][1]) == pytest.approx(np.mean([1.5e7, 1.1e7, 0.0]))
    assert float(rows[3][3]) == pytest.approx(np.mean([412.3, 405.0, 399.99]))


def test_summary_matches_arithmetic_means():
    report = sample_report()
    summary = summarise(report)
    assert summary["mean_min_tp_bps"] == pytest.approx((1.5e7 + 1.1e7) / 3)
    assert summary["stderr_avg_lux"] == pytest.approx(np.std([412.3, 405.0, 399.99], ddof=1) / math.sqrt(3))
    single = TrialReport(report.records[:1])
    assert math.isnan(single.stderr()["avg_lux"])


def test_results_writer_requires_initialize(tmp_path):
    writer = ResultsWriter(tmp_path / "r.csv")
    with pytest.raises(RuntimeError):
        writer.write_record(sample_report().records[0])


def test_heatmap_shape_and_zero_design(tmp_path):
    room = Room(6, 6, 3)
    path = emit_heatmap(np.zeros(room.num_cells, dtype=int), room, tmp_path / "heatmap.txt")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 4 * room.grid_y
    assert all(line.split() == ["0"] * room.grid_x for line in lines)


def test_heatmap_rows_run_from_ceiling_to_floor(tmp_path):
    room = Room(6, 6, 3, grid_x=3, grid_y=2)
    xi = np.zeros(room.num_cells, dtype=int)
    xi[room.cell_index(0, 2, 0)] = 1
    xi[room.cell_index(3, 0, 1)] = 1
    path = emit_heatmap(xi, room, tmp_path / "heatmap.txt")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "0 0 0"
    assert lines[1] == "0 0 1"
    assert lines[6] == "1 0 0"
    np.testing.assert_array_equal(read_heatmap(path, room), xi)
    assert wall_matrices(xi, room)[3, 1, 0] == 1


def test_heatmap_rejects_wrong_length(tmp_path):
    room = Room(6, 6, 3)
    with pytest.raises(ValueError):
        emit_heatmap(np.zeros(5), room, tmp_path / "heatmap.txt")


def test_heatmap_png_is_written(tmp_path):
    room = Room(6, 6, 3)
    xi = np.random.default_rng(1).integers(0, 2, room.num_cells)
    path = render_heatmap_png(xi, room, tmp_path / "heatmap.png", title="four walls")
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_tensor_dump(tmp_path):
    scenario = desk_scenario()
    tensor = scenario.sensor_tensor
    path = dump_tensor(tensor, tmp_path / "tensor.csv")
    with open(path, encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    los_rows = [r for r in rows if r["z"] == "-1"]
    nlos_rows = [r for r in rows if r["z"] != "-1"]
    assert len(los_rows) == np.count_nonzero(tensor.los)
    assert len(nlos_rows) == tensor.nlos_gain.size
    for r in los_rows:
        assert float(r["gain"]) == tensor.los[int(r["m"]), int(r["l"])]
    for r in nlos_rows[:20]:
        assert float(r["gain"]) == tensor.nlos_value(int(r["m"]), int(r["l"]), int(r["z"]))


def test_sweep_table(tmp_path):
    rows = [{"users": 2, "mean_avg_lux": 410.5}, {"users": 4, "mean_avg_lux": 409.25, "note": "x"}]
    path = emit_sweep(rows, tmp_path / "sweep.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == ["users,mean_avg_lux,note", "2,410.5,", "4,409.25,x"]


def test_lp_writer_wraps_long_rows(tmp_path):
    coeffs = {f"P_{m}": float(m + 1) for m in range(8)}
    lp = LinearProgram(
        objective={"phi": 1.0},
        rows=[Row("long_row", coeffs, "<=", 3.5)],
        bounds={"phi": (None, None), "P_0": (0.0, 0.1)},
        binaries=[],
        comments=["wrapped"],
    )
    writer = LPWriter(tmp_path / "wrap.lp")
    writer.initialize(lp)
    for row in lp.rows:
        writer.write_row(row)
    writer.finalize(lp)
    text = (tmp_path / "wrap.lp").read_text(encoding="utf-8")
    assert " long_row: + 1.0 P_0" in text
    assert "   + 7.0 P_6 + 8.0 P_7 <= 3.5" in text
    assert writer.row_count == 1
    assert parse_lp(text) == lp
