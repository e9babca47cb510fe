import json
import os

import numpy as np
import pytest

from morlgp.harness import BoundsPair, BoundsReport, EpisodeDiffReport, EvalReport
from morlgp.report import (
    atomic_write_text,
    bounds_csv,
    bounds_to_json,
    emit_table,
    episode_diffs_csv,
    episode_reports_to_json,
    episode_summary_csv,
    grid_to_csv,
    parse_table,
    reports_to_json,
)


def make_report(weight=-0.23, mse=1.529e-05, sigma=1.496e-02):
    return EvalReport(
        weight=weight, mse=mse, median_sigma=sigma,
        v_actual=np.array([0.1, 0.2]), v_predicted=np.array([0.11, 0.19]),
        q_actual=np.zeros((2, 2)), q_predicted=np.zeros((2, 2)),
        policy_actual=np.array([0, 1]), wall_clock_ms=3.5,
    )


class TestTable:
    def test_exact_row_format(self):
        text = emit_table([make_report()])
        assert text == "weight,mse,median_sigma\n-0.23,1.529e-05,1.496e-02\n"

    def test_parse_round_trip(self):
        reports = [make_report(-0.16, 1.019e-04, 2e-2),
                   make_report(-0.60, 4.999e-02, 5e-2)]
        rows = parse_table(emit_table(reports))
        assert [r["weight"] for r in rows] == [-0.16, -0.60]
        assert rows[0]["mse"] == pytest.approx(1.019e-04)

    def test_empty_reports_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            emit_table([])

    def test_json_contains_full_detail(self):
        doc = json.loads(reports_to_json([make_report()]))
        assert doc[0]["weight"] == -0.23
        assert doc[0]["v_actual"] == [0.1, 0.2]
        assert doc[0]["policy_actual"] == [0, 1]


class TestGridCsv:
    def test_nan_becomes_empty_field(self):
        grid = np.array([[1.0, np.nan], [3.25, 4.0]])
        assert grid_to_csv(grid) == "1,\n3.25,4\n"

    def test_round_trip_precision(self):
        grid = np.array([[0.123456789012, -9.87654321e-7]])
        text = grid_to_csv(grid)
        vals = [float(v) for v in text.strip().split(",")]
        assert vals[0] == pytest.approx(0.123456789012, rel=1e-9)


class TestEpisodeCsv:
    def setup_method(self):
        self.reports = [
            EpisodeDiffReport(episode=0, start_state=5,
                              fractions=np.array([0.1, 0.3]),
                              q1=0.1, median=0.2, q3=0.3),
            EpisodeDiffReport(episode=1, start_state=9,
                              fractions=np.array([0.5]),
                              q1=0.5, median=0.5, q3=0.5),
        ]

    def test_summary_rows(self):
        lines = episode_summary_csv(self.reports).strip().splitlines()
        assert lines[0] == "episode,q1,median,q3"
        assert lines[1].startswith("0,1.000000e-01,2.000000e-01,3.000000e-01")
        assert len(lines) == 3

    def test_per_step_rows(self):
        lines = episode_diffs_csv(self.reports).strip().splitlines()
        assert lines[0] == "episode,step,fraction"
        assert len(lines) == 4  # 2 steps + 1 step
        assert lines[3].startswith("1,0,")

    def test_json_keeps_fractions(self):
        doc = json.loads(episode_reports_to_json(self.reports))
        assert doc[0]["fractions"] == [0.1, 0.3]
        assert doc[1]["start_state"] == 9


class TestBoundsCsv:
    def setup_method(self):
        pair = BoundsPair(w=np.array([1.0]), w_prime=np.array([2.0]),
                          observed_dv=9.5, bound_v=10.0,
                          observed_dq=10.0, bound_q=10.0, passed=True)
        self.report = BoundsReport(pairs=[pair], convexity_violations=0,
                                   all_passed=True)

    def test_csv_layout(self):
        lines = bounds_csv(self.report).strip().splitlines()
        assert lines[0] == "pair,observed_dv,bound_v,observed_dq,bound_q,passed"
        fields = lines[1].split(",")
        assert fields[0] == "0" and fields[-1] == "1"
        assert float(fields[1]) == 9.5

    def test_json_layout(self):
        doc = json.loads(bounds_to_json(self.report))
        assert doc["all_passed"] is True
        assert doc["pairs"][0]["w"] == [1.0]


class TestAtomicWrite:
    def test_writes_and_overwrites(self, tmp_path):
        path = str(tmp_path / "out.csv")
        atomic_write_text(path, "first\n")
        atomic_write_text(path, "second\n")
        with open(path) as fh:
            assert fh.read() == "second\n"

    def test_no_temp_files_left(self, tmp_path):
        atomic_write_text(str(tmp_path / "a.txt"), "x")
        assert sorted(os.listdir(tmp_path)) == ["a.txt"]
