"""
Calibración del guante
Estima la matriz de medición a partir de posturas de referencia pareadas con
lecturas del guante, y la covarianza del ruido a partir de las fluctuaciones
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from posture.config import get_settings
from posture.errors import (
    DimensionMismatchError,
    InsufficientWindowSamplesError,
    NonFiniteInputError,
    RankDeficientPosesError,
)
from posture.estimators import MeasurementModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CalibrationSet:
    """
    Datos pareados de calibración

    reference_poses es X_g (n × N), glove_readings es Y_g (m × N) y
    raw_windows, si existe, guarda las muestras crudas (m × N × W) de cada postura.
    """
    reference_poses: np.ndarray
    glove_readings: np.ndarray
    raw_windows: Optional[np.ndarray] = None
    dof_names: Tuple[str, ...] = ()
    channels: Tuple[str, ...] = ()

    def __post_init__(self):
        poses = np.array(self.reference_poses, dtype=float)
        readings = np.array(self.glove_readings, dtype=float)
        if poses.ndim != 2 or readings.ndim != 2:
            raise DimensionMismatchError("X_g e Y_g deben ser matrices")
        if poses.shape[1] != readings.shape[1]:
            raise DimensionMismatchError(
                f"X_g tiene {poses.shape[1]} posturas y Y_g {readings.shape[1]} lecturas")
        if not (np.all(np.isfinite(poses)) and np.all(np.isfinite(readings))):
            raise NonFiniteInputError("Datos de calibración no finitos")
        if self.raw_windows is not None:
            windows = np.array(self.raw_windows, dtype=float)
            if windows.ndim != 3 or windows.shape[:2] != readings.shape:
                raise DimensionMismatchError(
                    f"Las ventanas crudas deben ser {readings.shape} × W, llegaron {windows.shape}")
            object.__setattr__(self, "raw_windows", windows)
        object.__setattr__(self, "reference_poses", poses)
        object.__setattr__(self, "glove_readings", readings)

    @property
    def n(self) -> int:
        return self.reference_poses.shape[0]

    @property
    def m(self) -> int:
        return self.glove_readings.shape[0]

    @property
    def count(self) -> int:
        return self.reference_poses.shape[1]


def average_windows(raw_windows: np.ndarray, last: Optional[int] = None) -> np.ndarray:
    """
    Promedia las últimas `last` muestras de cada ventana

    Args:
        raw_windows: Muestras crudas m × N × W
        last: Muestras a promediar (por defecto POSTURE_WINDOW = 50)

    Returns:
        Matriz m × N de lecturas promediadas (Y_g)
    """
    last = get_settings().window if last is None else last
    windows = np.asarray(raw_windows, dtype=float)
    if windows.ndim != 3:
        raise DimensionMismatchError("Las ventanas crudas deben tener forma m × N × W")
    if windows.shape[2] < last:
        logger.warning("Ventanas de %d muestras, menos que las %d pedidas; se usan todas",
                       windows.shape[2], last)
    return windows[:, :, -last:].mean(axis=2)


def estimate_measurement_matrix(cal: CalibrationSet) -> np.ndarray:
    """
    Ĥ_g = Y_g((X_gᵀ)†)ᵀ, la solución de mínimos cuadrados de Y_g = Ĥ_g X_g

    Raises:
        RankDeficientPosesError: si las posturas no generan el espacio de estados
    """
    rank = np.linalg.matrix_rank(cal.reference_poses)
    if rank < cal.n:
        raise RankDeficientPosesError(
            f"X_g tiene rango {rank} < n={cal.n} con N={cal.count} posturas de calibración")
    if cal.count > cal.n:
        logger.debug("Calibración sobredeterminada: N=%d > n=%d", cal.count, cal.n)

    # Y_g = Ĥ X_g  <=>  X_gᵀ Ĥᵀ = Y_gᵀ
    solution, _, _, _ = scipy.linalg.lstsq(cal.reference_poses.T, cal.glove_readings.T)
    return solution.T


def calibration_residual(cal: CalibrationSet, H: np.ndarray) -> float:
    """Norma de Frobenius de Y_g − Ĥ_g X_g"""
    return float(np.linalg.norm(cal.glove_readings - H @ cal.reference_poses, ord="fro"))


def estimate_noise_covariance(raw_windows: np.ndarray) -> np.ndarray:
    """
    Covarianza del ruido a partir de las fluctuaciones alrededor de cada media

    Se agrupan las desviaciones de todas las ventanas (covarianza muestral
    combinada con N·(W − 1) grados de libertad).
    """
    windows = np.asarray(raw_windows, dtype=float)
    if windows.ndim != 3:
        raise DimensionMismatchError("Las ventanas crudas deben tener forma m × N × W")
    m, count, width = windows.shape
    if width < 2:
        raise InsufficientWindowSamplesError(f"Cada ventana necesita al menos 2 muestras, tiene {width}")

    deviations = (windows - windows.mean(axis=2, keepdims=True)).reshape(m, count * width)
    R = deviations @ deviations.T / (count * (width - 1))
    return 0.5 * (R + R.T)


def calibrate(cal: CalibrationSet, window: Optional[int] = None) -> MeasurementModel:
    """
    Modelo de medición completo del guante: Ĥ_g y R

    Si hay ventanas crudas, R sale de sus fluctuaciones; si no, R = 0.
    """
    H = estimate_measurement_matrix(cal)
    residual = calibration_residual(cal, H)
    logger.info("Ĥ_g estimada (%d×%d), residuo de Frobenius %.4g", H.shape[0], H.shape[1], residual)

    R = None
    if cal.raw_windows is not None:
        last = get_settings().window if window is None else window
        R = estimate_noise_covariance(cal.raw_windows[:, :, -last:])
    return MeasurementModel(H=H, R=R, channels=cal.channels)
