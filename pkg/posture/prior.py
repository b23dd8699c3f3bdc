"""
Modelo a priori de posturas de agarre
Media y covarianza de un conjunto de posturas, sinergias y diagnóstico de normalidad
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from scipy import stats

from posture.config import get_settings
from posture.errors import (
    DimensionMismatchError,
    InsufficientSamplesError,
    NonFiniteInputError,
    SingularCovarianceError,
)
from posture.hand_model import HandModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PoseSet:
    """N posturas × n DoFs en grados, ligadas a un modelo de mano"""
    model: HandModel
    poses: np.ndarray
    source: str = ""

    def __post_init__(self):
        poses = np.atleast_2d(np.array(self.poses, dtype=float))
        if poses.ndim != 2 or poses.shape[1] != self.model.n:
            raise DimensionMismatchError(
                f"Se esperaban {self.model.n} columnas de DoFs, llegaron {poses.shape[-1]}")
        if poses.shape[0] < 1:
            raise InsufficientSamplesError("El conjunto de posturas está vacío")
        if not np.all(np.isfinite(poses)):
            raise NonFiniteInputError("Las posturas contienen valores no finitos")
        poses.setflags(write=False)
        object.__setattr__(self, "poses", poses)

    @property
    def count(self) -> int:
        return self.poses.shape[0]


@dataclass(frozen=True)
class PriorModel:
    """
    Gaussiana a priori (μ_o, P_o)

    cov ya incluye el ridge; ridge registra cuánto se sumó a la diagonal.
    sample_count = 0 indica un prior analítico (no estimado de datos).
    """
    mu: np.ndarray
    cov: np.ndarray
    sample_count: int
    ridge: float = 0.0

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (mu.size, mu.size):
            raise DimensionMismatchError(f"P_o {cov.shape} no es compatible con μ_o de tamaño {mu.size}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(cov))):
            raise NonFiniteInputError("μ_o o P_o contienen valores no finitos")
        scale = max(np.abs(cov).max(), 1.0)
        if np.abs(cov - cov.T).max() > 1e-10 * scale:
            raise ValueError("P_o no es simétrica")
        mu.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "cov", cov)

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def is_invertible(self) -> bool:
        try:
            scipy.linalg.cho_factor(self.cov)
        except np.linalg.LinAlgError:
            return False
        return True

    def cholesky(self):
        """Factor de Cholesky de P_o; SingularCovarianceError si no es definida positiva"""
        try:
            return scipy.linalg.cho_factor(self.cov)
        except np.linalg.LinAlgError:
            raise SingularCovarianceError("P_o no es definida positiva")

    def mahalanobis_sq(self, x: np.ndarray) -> np.ndarray:
        """
        Distancia de Mahalanobis al cuadrado (x−μ_o)ᵀP_o⁻¹(x−μ_o)

        Args:
            x: Postura (n,) o lote de posturas (k, n)

        Returns:
            Escalar o vector (k,) de distancias al cuadrado
        """
        factor = self.cholesky()
        deviation = np.asarray(x, dtype=float) - self.mu
        if deviation.ndim == 1:
            return float(deviation @ scipy.linalg.cho_solve(factor, deviation))
        solved = scipy.linalg.cho_solve(factor, deviation.T)
        return np.einsum("ij,ji->i", deviation, solved)


@dataclass(frozen=True)
class SynergyDecomposition:
    """Descomposición en sinergias posturales (componentes principales de P_o)"""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    explained_variance_ratio: np.ndarray
    clamped: int = 0

    def cumulative_explained(self) -> np.ndarray:
        return np.cumsum(self.explained_variance_ratio)

    def components_for(self, fraction: float) -> int:
        """Número mínimo de sinergias que explican al menos `fraction` de la varianza"""
        cumulative = self.cumulative_explained()
        reached = np.nonzero(cumulative >= fraction - 1e-12)[0]
        return int(reached[0]) + 1 if reached.size else self.eigenvalues.size

    def leading(self, k: int) -> "SynergyDecomposition":
        """Primeras k sinergias (las de mayor varianza)"""
        k = max(0, min(k, self.eigenvalues.size))
        return SynergyDecomposition(
            eigenvalues=self.eigenvalues[:k],
            eigenvectors=self.eigenvectors[:, :k],
            explained_variance_ratio=self.explained_variance_ratio[:k],
            clamped=self.clamped,
        )

    def reconstruct(self) -> np.ndarray:
        """V·diag(λ)·Vᵀ con las sinergias presentes"""
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T

    def scores(self, poses: PoseSet, prior: PriorModel) -> np.ndarray:
        """Coordenadas de las posturas centradas en la base de sinergias"""
        return (poses.poses - prior.mu) @ self.eigenvectors


@dataclass(frozen=True)
class NormalityDiagnostic:
    """Q-Q de distancias de Mahalanobis contra cuantiles chi-cuadrado"""
    squared_mahalanobis: np.ndarray
    chi_square_quantiles: np.ndarray
    adjusted_r_squared: float
    degenerate: bool = False


def build_prior(poses: PoseSet, ridge: Optional[float] = None) -> PriorModel:
    """
    Construye (μ_o, P_o) a partir de un conjunto de posturas

    Args:
        poses: Posturas de agarre (N ≥ 2)
        ridge: Valor sumado a la diagonal de P_o (grados²); por defecto POSTURE_RIDGE

    Returns:
        PriorModel con la covarianza muestral insesgada más ridge·I
    """
    ridge = get_settings().ridge if ridge is None else float(ridge)
    if ridge < 0:
        raise ValueError("El ridge debe ser >= 0")
    if poses.count < 2:
        raise InsufficientSamplesError(f"Se necesitan al menos 2 posturas, hay {poses.count}")

    mu = poses.poses.mean(axis=0)
    cov = np.cov(poses.poses, rowvar=False, ddof=1)
    cov = 0.5 * (cov + cov.T) + ridge * np.eye(poses.model.n)

    prior = PriorModel(mu=mu, cov=cov, sample_count=poses.count, ridge=ridge)
    if not prior.is_invertible:
        logger.warning("P_o no es invertible (N=%d, ridge=%g); solo las formas MVE son utilizables",
                       poses.count, ridge)
    return prior


def synergies(prior: PriorModel) -> SynergyDecomposition:
    """
    Autodescomposición de P_o ordenada de mayor a menor varianza

    Los autovalores negativos por redondeo se recortan a 0 (se cuentan en `clamped`).
    El signo de cada autovector se fija con su componente de mayor valor absoluto positiva.
    """
    values, vectors = scipy.linalg.eigh(prior.cov)
    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = vectors[:, order]

    negative = values < 0
    clamped = int(np.count_nonzero(negative))
    if clamped:
        logger.debug("Se recortaron %d autovalores negativos (mínimo %.3e)", clamped, values.min())
        values = np.where(negative, 0.0, values)

    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    vectors = vectors * np.where(signs == 0, 1.0, signs)

    total = values.sum()
    if total > 0:
        ratio = values / total
    else:
        # P_o nula: ninguna dirección domina, la varianza explicada se reparte por igual
        logger.warning("P_o es nula; la varianza explicada se reparte uniformemente")
        ratio = np.full(values.size, 1.0 / values.size) if values.size else values
    return SynergyDecomposition(eigenvalues=values, eigenvectors=vectors,
                                explained_variance_ratio=ratio, clamped=clamped)


def normality_diagnostic(poses: PoseSet, prior: PriorModel) -> NormalityDiagnostic:
    """
    Diagnóstico Q-Q de normalidad multivariada

    Las distancias de Mahalanobis ordenadas se comparan con los cuantiles de una
    chi-cuadrado con n grados de libertad en (i − 0.5)/N. El R² ajustado se mide
    contra la recta fija y = x (ningún parámetro estimado).
    """
    distances = np.sort(np.atleast_1d(prior.mahalanobis_sq(poses.poses)))
    count = distances.size
    positions = (np.arange(1, count + 1) - 0.5) / count
    quantiles = stats.chi2.ppf(positions, df=prior.n)

    total = np.sum((distances - distances.mean()) ** 2)
    if total == 0.0:
        logger.warning("Diagnóstico degenerado: todas las distancias de Mahalanobis son iguales")
        return NormalityDiagnostic(distances, quantiles, float("nan"), degenerate=True)

    fitted_parameters = 0
    r_squared = 1.0 - np.sum((distances - quantiles) ** 2) / total
    adjusted = 1.0 - (1.0 - r_squared) * (count - 1) / (count - fitted_parameters - 1) if count > 1 else r_squared
    return NormalityDiagnostic(distances, quantiles, float(adjusted))
