import logging

import numpy as np
import pytest

from posture.calibration import (
    CalibrationSet,
    average_windows,
    calibrate,
    calibration_residual,
    estimate_measurement_matrix,
    estimate_noise_covariance,
)
from posture.errors import (
    DimensionMismatchError,
    InsufficientWindowSamplesError,
    NonFiniteInputError,
    RankDeficientPosesError,
)


def _consistent_set(rng, count=15, m=5, n=15):
    A = rng.normal(size=(m, n))
    X = rng.normal(30.0, 20.0, size=(n, count))
    return A, CalibrationSet(reference_poses=X, glove_readings=A @ X)


def test_exact_recovery(rng):
    A, cal = _consistent_set(rng)
    np.testing.assert_allclose(estimate_measurement_matrix(cal), A, atol=1e-10)


def test_identity_poses_return_readings(rng):
    Y = rng.normal(size=(5, 15))
    H = estimate_measurement_matrix(CalibrationSet(reference_poses=np.eye(15), glove_readings=Y))
    np.testing.assert_allclose(H, Y, atol=1e-12)


def test_noisy_recovery_matches_normal_equations(rng):
    A = rng.normal(size=(5, 15))
    X = rng.normal(30.0, 20.0, size=(15, 40))
    Y = A @ X + rng.normal(0.0, 0.5, size=(5, 40))
    H = estimate_measurement_matrix(CalibrationSet(reference_poses=X, glove_readings=Y))

    oracle = Y @ X.T @ np.linalg.inv(X @ X.T)
    assert np.linalg.norm(H - A) <= np.linalg.norm(oracle - A) + 1e-10


def test_scale_equivariance(rng):
    _, cal = _consistent_set(rng, count=20)
    scaled = CalibrationSet(reference_poses=cal.reference_poses, glove_readings=3.5 * cal.glove_readings)
    np.testing.assert_allclose(estimate_measurement_matrix(scaled), 3.5 * estimate_measurement_matrix(cal),
                               rtol=1e-12, atol=1e-12)


def test_residual_detects_inconsistency(rng):
    _, cal = _consistent_set(rng, count=20)
    assert calibration_residual(cal, estimate_measurement_matrix(cal)) < 1e-10

    noisy = CalibrationSet(reference_poses=cal.reference_poses,
                           glove_readings=cal.glove_readings + rng.normal(0.0, 1.0, size=(5, 20)))
    assert calibration_residual(noisy, estimate_measurement_matrix(noisy)) > 1e-3


def test_too_few_poses(rng):
    X = rng.normal(size=(15, 10))
    with pytest.raises(RankDeficientPosesError) as info:
        estimate_measurement_matrix(CalibrationSet(reference_poses=X, glove_readings=rng.normal(size=(5, 10))))
    assert info.value.code == "RANK_DEFICIENT_POSES"
    assert "N >= 15" in info.value.hint


def test_repeated_poses_are_rank_deficient(rng):
    pose = rng.normal(size=(15, 1))
    X = np.tile(pose, (1, 20))
    with pytest.raises(RankDeficientPosesError):
        estimate_measurement_matrix(CalibrationSet(reference_poses=X, glove_readings=np.ones((5, 20))))


def test_calibration_set_validation(rng):
    with pytest.raises(DimensionMismatchError):
        CalibrationSet(reference_poses=np.zeros((15, 15)), glove_readings=np.zeros((5, 14)))
    with pytest.raises(DimensionMismatchError):
        CalibrationSet(reference_poses=np.zeros((15, 15)), glove_readings=np.zeros((5, 15)),
                       raw_windows=np.zeros((5, 14, 50)))
    bad = np.zeros((5, 15))
    bad[0, 0] = np.inf
    with pytest.raises(NonFiniteInputError):
        CalibrationSet(reference_poses=np.zeros((15, 15)), glove_readings=bad)


# Ventanas y ruido

def test_average_uses_last_samples():
    windows = np.zeros((1, 2, 60))
    windows[:, :, :10] = 1000.0
    windows[0, 0, 10:] = 3.0
    windows[0, 1, 10:] = np.arange(50)
    np.testing.assert_allclose(average_windows(windows, last=50), [[3.0, 24.5]])


def test_average_short_windows_warns(caplog):
    windows = np.arange(12, dtype=float).reshape(1, 2, 6)
    with caplog.at_level(logging.WARNING, logger="posture"):
        averaged = average_windows(windows, last=50)
    np.testing.assert_allclose(averaged, [[2.5, 8.5]])
    assert "menos que las 50" in caplog.text


def test_constant_windows_give_zero_noise():
    windows = np.ones((3, 4, 10)) * np.arange(3)[:, None, None]
    np.testing.assert_array_equal(estimate_noise_covariance(windows), np.zeros((3, 3)))


def test_pooled_covariance_small_example():
    windows = np.array([[[1.0, 2.0, 3.0], [4.0, 6.0, 8.0]]])
    # desvíos (−1, 0, 1) y (−2, 0, 2): 10 / (2·2)
    np.testing.assert_allclose(estimate_noise_covariance(windows), [[2.5]])


def test_iid_noise_recovered(rng):
    sigma = 2.0
    means = rng.normal(50.0, 20.0, size=(5, 15, 1))
    windows = means + rng.normal(0.0, sigma, size=(5, 15, 1000))
    R = estimate_noise_covariance(windows)
    expected = sigma ** 2 * np.eye(5)
    assert np.linalg.norm(R - expected) / np.linalg.norm(expected) < 0.05
    np.testing.assert_array_equal(R, R.T)
    assert np.linalg.eigvalsh(R).min() >= 0


def test_correlated_channels(rng):
    shared = rng.normal(0.0, 3.0, size=(1, 15, 200))
    windows = np.concatenate([shared, shared], axis=0) + rng.normal(10.0, 1.0, size=(2, 15, 1))
    R = estimate_noise_covariance(windows)
    assert R[0, 1] == pytest.approx(R[0, 0], rel=0.05)
    assert R[0, 1] == pytest.approx(R[1, 1], rel=0.05)


def test_single_sample_windows():
    with pytest.raises(InsufficientWindowSamplesError):
        estimate_noise_covariance(np.zeros((2, 3, 1)))


# Calibración completa

def test_calibrate_without_windows(rng):
    A, cal = _consistent_set(rng)
    model = calibrate(cal)
    np.testing.assert_allclose(model.H, A, atol=1e-10)
    assert not model.has_noise


def test_calibrate_with_windows(rng):
    A = rng.normal(size=(3, 15))
    X = rng.normal(30.0, 20.0, size=(15, 40))
    windows = (A @ X)[:, :, None] + rng.normal(0.0, 0.5, size=(3, 40, 80))
    windows[:, :, :30] += 100.0
    cal = CalibrationSet(reference_poses=X, glove_readings=average_windows(windows, last=50),
                         raw_windows=windows, channels=("s1", "s2", "s3"))

    model = calibrate(cal, window=50)
    assert model.channels == ("s1", "s2", "s3")
    assert model.has_noise
    np.testing.assert_allclose(model.R, estimate_noise_covariance(windows[:, :, -50:]))
    # el transitorio inicial de +100 queda fuera de la ventana
    assert np.all(np.diag(model.R) < 1.0)
    np.testing.assert_allclose(model.H, A, atol=0.1)
