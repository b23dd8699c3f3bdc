import json

import numpy as np
import pytest

from csv_fixtures import write_measurements_csv, write_raw_windows_csv
from posture.dataio import (
    load_measurement_model,
    load_prior,
    load_simulation_config,
    read_matrix_csv,
    read_measurements_csv,
    read_pose_csv,
    read_raw_windows_csv,
    save_measurement_model,
    save_prior,
    simulation_config_from_dict,
    write_matrix_csv,
    write_pose_csv,
)
from posture.errors import DimensionMismatchError, FileFormatError, UnknownDofError
from posture.estimators import MeasurementModel
from posture.prior import PoseSet, PriorModel, build_prior


def test_pose_csv_round_trip(tmp_path, hand, rng):
    poses = PoseSet(hand, rng.normal(30.0, 20.0, size=(5, 15)))
    path = tmp_path / "poses.csv"
    write_pose_csv(poses, path)
    assert path.read_text(encoding="utf-8").splitlines()[0] == ",".join(hand.names)

    restored = read_pose_csv(path, hand)
    np.testing.assert_array_equal(restored.poses, poses.poses)
    assert restored.source == str(path)


def test_pose_csv_binds_columns_by_name(tmp_path, two_dof):
    path = tmp_path / "poses.csv"
    path.write_text("B,A\n1,2\n3,4\n", encoding="utf-8")
    np.testing.assert_array_equal(read_pose_csv(path, two_dof).poses, [[2.0, 1.0], [4.0, 3.0]])


def test_csv_with_byte_order_mark(tmp_path, two_dof):
    # Excel guarda los CSV UTF-8 con BOM
    path = tmp_path / "poses.csv"
    path.write_text("\ufeffA,B\n1,2\n", encoding="utf-8")
    np.testing.assert_array_equal(read_pose_csv(path, two_dof).poses, [[1.0, 2.0]])

    matrix = tmp_path / "H.csv"
    matrix.write_text("\ufeff1,0\n0,1\n", encoding="utf-8")
    np.testing.assert_array_equal(read_matrix_csv(matrix), np.eye(2))


@pytest.mark.parametrize("content, line", [
    ("A,B\n1,2\n3,x\n", 3),
    ("A,B\n1,2\n3\n", 3),
    ("A,B\n1,2\n\n3,inf\n", 4),
    ("A,C\n1,2\n", 1),
    ("A,A,B\n1,2,3\n", 1),
    ("A\n1\n", 1),
])
def test_pose_csv_errors_carry_line(tmp_path, two_dof, content, line):
    path = tmp_path / "bad.csv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(FileFormatError) as info:
        read_pose_csv(path, two_dof)
    assert info.value.line == line
    assert f"bad.csv:{line}" in str(info.value)
    assert info.value.code == "FILE_FORMAT"


def test_pose_csv_needs_rows(tmp_path, two_dof):
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(FileFormatError):
        read_pose_csv(empty, two_dof)
    header_only = tmp_path / "header.csv"
    header_only.write_text("A,B\n", encoding="utf-8")
    with pytest.raises(FileFormatError):
        read_pose_csv(header_only, two_dof)
    with pytest.raises(FileFormatError):
        read_pose_csv(tmp_path / "missing.csv", two_dof)


def test_measurements_csv(tmp_path):
    path = tmp_path / "y.csv"
    write_measurements_csv(path, ["s2", "s1"], np.array([[1.5, 2.5], [3.0, 4.0]]))
    values, channels = read_measurements_csv(path)
    assert channels == ("s2", "s1")
    np.testing.assert_array_equal(values, [[1.5, 2.5], [3.0, 4.0]])

    reordered, channels = read_measurements_csv(path, ["s1", "s2"])
    assert channels == ("s1", "s2")
    np.testing.assert_array_equal(reordered, [[2.5, 1.5], [4.0, 3.0]])


def test_matrix_csv_is_exact(tmp_path, rng):
    matrix = rng.normal(size=(3, 4)) / 3.0
    path = tmp_path / "m.csv"
    write_matrix_csv(path, matrix)
    np.testing.assert_array_equal(read_matrix_csv(path), matrix)


def test_raw_windows_round_trip(tmp_path, rng):
    windows = rng.normal(size=(2, 3, 4))
    path = tmp_path / "raw.csv"
    write_raw_windows_csv(path, windows, ["c1", "c2"])
    restored, channels = read_raw_windows_csv(path)
    assert channels == ("c1", "c2")
    np.testing.assert_array_equal(restored, windows)

    swapped, channels = read_raw_windows_csv(path, ["c2", "c1"])
    np.testing.assert_array_equal(swapped, windows[::-1])


def test_raw_windows_errors(tmp_path):
    path = tmp_path / "raw.csv"
    path.write_text("window,channel,value\n0,c1,1\n", encoding="utf-8")
    with pytest.raises(FileFormatError):
        read_raw_windows_csv(path)

    path.write_text("window_id,channel,value\n0,c1,1\n0,c1,2\n1,c1,3\n", encoding="utf-8")
    with pytest.raises(FileFormatError):
        read_raw_windows_csv(path)

    path.write_text("window_id,channel,value\n0,c1,1\n0,c9,2\n", encoding="utf-8")
    with pytest.raises(FileFormatError) as info:
        read_raw_windows_csv(path, ["c1"])
    assert info.value.line == 3


def test_prior_bundle(tmp_path, hand, rng):
    prior = build_prior(PoseSet(hand, rng.normal(30.0, 10.0, size=(40, 15))), ridge=1e-6)
    path = tmp_path / "prior.json"
    cov_path = save_prior(prior, path, hand)
    assert cov_path.name == "prior_cov.csv"
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["N"] == 40 and data["cov_csv"] == "prior_cov.csv"

    restored, model = load_prior(path)
    assert model.names == hand.names
    np.testing.assert_array_equal(restored.mu, prior.mu)
    np.testing.assert_array_equal(restored.cov, prior.cov)
    assert restored.sample_count == 40
    assert restored.ridge == 1e-6


def test_prior_bundle_errors(tmp_path, two_dof):
    path = tmp_path / "prior.json"
    path.write_text('{"dof_names": ["A", "B"], "mu": [0, 0]', encoding="utf-8")
    with pytest.raises(FileFormatError):
        load_prior(path)

    path.write_text(json.dumps({"dof_names": ["A", "B"], "mu": [0, 0], "N": 3, "ridge": 0}), encoding="utf-8")
    with pytest.raises(FileFormatError) as info:
        load_prior(path)
    assert "cov_csv" in str(info.value)

    save_prior(PriorModel(mu=[0.0, 0.0], cov=np.eye(2), sample_count=0), path, two_dof)
    data = json.loads(path.read_text(encoding="utf-8"))
    data["dof_names"] = ["A", "B", "C"]
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(DimensionMismatchError):
        load_prior(path)


def test_measurement_model_bundle(tmp_path, hand):
    measurement = MeasurementModel.from_selection(hand, ["TM", "IM"], R=np.diag([4.0, 9.0]))
    path = tmp_path / "glove.json"
    save_measurement_model(measurement, path, hand)
    assert (tmp_path / "glove_H.csv").is_file() and (tmp_path / "glove_R.csv").is_file()

    restored, model = load_measurement_model(path)
    assert model.names == hand.names
    assert restored.is_selection
    assert restored.channels == ("TM", "IM")
    np.testing.assert_array_equal(restored.H, measurement.H)
    np.testing.assert_array_equal(restored.R, measurement.R)


def test_simulation_config_with_selection(hand):
    cfg = simulation_config_from_dict({"measured_dofs": ["TM", "IM"], "sigma_deg": 7, "seed": 5, "trials": 3},
                                      hand)
    assert cfg.seed == 5
    assert cfg.trials_per_pose == 3
    np.testing.assert_array_equal(cfg.noise_covariance, 49.0 * np.eye(2))
    assert cfg.describe()["measurement"] == {"measured_dofs": ["TM", "IM"]}

    overridden = simulation_config_from_dict({"measured_dofs": ["TM"], "seed": 5}, hand, seed=11)
    assert overridden.seed == 11


def test_simulation_config_from_files(tmp_path, hand, rng):
    H = rng.normal(size=(3, 15))
    write_matrix_csv(tmp_path / "H.csv", H)
    write_matrix_csv(tmp_path / "R.csv", np.diag([1.0, 2.0, 3.0]))
    path = tmp_path / "sim.json"
    path.write_text(json.dumps({"H_csv": "H.csv", "R_csv": "R.csv", "seed": 3}), encoding="utf-8")

    cfg = load_simulation_config(path, hand)
    np.testing.assert_array_equal(cfg.measurement.H, H)
    np.testing.assert_array_equal(cfg.noise_covariance, np.diag([1.0, 2.0, 3.0]))
    assert cfg.describe()["noise"] == {"R": [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]}


@pytest.mark.parametrize("data", [
    {"sigma_deg": 7},
    {"measured_dofs": ["TM"], "H_csv": "H.csv"},
    {"measured_dofs": ["TM"], "sigma_deg": 1, "R_csv": "R.csv"},
])
def test_simulation_config_exclusive_keys(tmp_path, hand, data):
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(FileFormatError) as info:
        load_simulation_config(path, hand)
    assert "sim.json" in str(info.value)


def test_simulation_config_unknown_dof(hand):
    with pytest.raises(UnknownDofError):
        simulation_config_from_dict({"measured_dofs": ["TM", "XX"]}, hand)
