"""산출물 저장소 (trajectory CSV, summary JSON, 결과표 CSV)."""

import numpy as np
import pytest

from schemas.response import RunSummary
from services.core_types import TrajectoryRecord
from services.errors import InvalidInputError
from storage.artifacts import (
    ArtifactStore,
    format_float,
    read_metric_table,
    trajectory_header,
)


def make_record(step, point=(0.1, -2.0)):
    return TrajectoryRecord(
        step=step,
        point=np.array(point),
        losses=np.array([1.0 / 3.0, 2.5]),
        weights=np.array([1.0, 0.5]),
        direction_norm=0.75,
        stationarity=0.2,
        sigma_min=0.0,
        step_size=1e-3,
    )


def make_summary(**overrides):
    data = dict(
        problem="toy", method="fairgrad", alpha=2.0, seed=0, step_rule="fixed",
        termination="stationary", exit_code=0, steps=1, final_point=[0.0, 0.0],
        final_losses=[0.0, 0.0], final_weights=[1.0, 1.0], final_stationarity=0.0,
        final_sigma_min=0.0, final_step_size=1e-3, mean_min_gain=0.0, wall_time=0.01,
    )
    data.update(overrides)
    return RunSummary(**data)


class TestTrajectoryCsv:

    def test_header(self):
        assert trajectory_header(2, 2) == [
            "step", "x1", "x2", "l1", "l2", "w1", "w2", "dnorm", "stationarity", "sigma_min", "eta",
        ]

    def test_seventeen_digits(self):
        assert format_float(0.1) == "0.10000000000000001"
        assert format_float(1.0) == "1"

    def test_float_round_trip(self):
        rng = np.random.default_rng(0)
        for value in rng.standard_normal(200) * 10.0 ** rng.integers(-300, 300, size=200):
            assert float(format_float(value)) == value

    def test_write_and_read(self, tmp_path):
        store = ArtifactStore(tmp_path / "run")
        path = store.write_trajectory([make_record(0), make_record(1, (0.2, -1.5))])
        rows = [line.split(",") for line in path.read_text(encoding="utf-8").splitlines()]
        assert rows[0] == trajectory_header(2, 2)
        assert len(rows) == 3
        assert rows[1][0] == "0"
        assert float(rows[1][3]) == 1.0 / 3.0
        assert rows[2][1] == format_float(0.2)

    def test_unix_line_endings(self, tmp_path):
        store = ArtifactStore(tmp_path)
        path = store.write_trajectory([make_record(0)])
        assert b"\r\n" not in path.read_bytes()

    def test_empty_trajectory_rejected(self, tmp_path):
        with pytest.raises(InvalidInputError):
            ArtifactStore(tmp_path).write_trajectory([])


class TestSummaryJson:

    def test_round_trip(self, tmp_path):
        store = ArtifactStore(tmp_path / "nested" / "dir")
        summary = make_summary(mean_min_gain_share=None)
        store.write_model(summary)
        assert store.read_model(RunSummary) == summary

    def test_child_store(self, tmp_path):
        child = ArtifactStore(tmp_path).child("alpha_2")
        child.write_model(make_summary())
        assert (tmp_path / "alpha_2" / "summary.json").exists()
        assert child.trajectory_path == tmp_path / "alpha_2" / "trajectory.csv"


class TestMetricTableCsv:

    def write(self, tmp_path, text):
        path = tmp_path / "table.csv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_arrow_directions(self, tmp_path):
        path = self.write(tmp_path, "method,a,b\ndirection,↑,↓\nSTL,1,2\nX,2,1\n")
        table = read_metric_table(path, baseline="STL")
        assert table.higher_is_better == (True, False)
        assert table.methods == ("STL", "X")

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_metric_table(tmp_path / "nope.csv")

    def test_missing_direction_row(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_metric_table(self.write(tmp_path, "method,a\nSTL,1\n"))

    def test_bad_direction_token(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_metric_table(self.write(tmp_path, "method,a\ndirection,sideways\nSTL,1\n"))

    def test_non_numeric_value(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_metric_table(self.write(tmp_path, "method,a\ndirection,higher\nSTL,abc\n"))

    def test_ragged_row(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_metric_table(self.write(tmp_path, "method,a,b\ndirection,higher,lower\nSTL,1\n"))

    def test_bad_header(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_metric_table(self.write(tmp_path, "name,a\ndirection,higher\nSTL,1\n"))
