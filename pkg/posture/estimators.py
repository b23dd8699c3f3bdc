"""
Estimadores de postura
Pseudo-inversa, maximización de la pdf (tres formas equivalentes), media
condicional gaussiana y estimación de mínima varianza (MVE)
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from posture.config import get_settings
from posture.errors import (
    DimensionMismatchError,
    IllConditionedGramError,
    IllConditionedInnovationError,
    NotSelectionMatrixError,
    RankDeficientError,
    SingularMeasuredBlockError,
    SingularNoiseError,
    SingularPriorError,
)
from posture.hand_model import HandModel, selection_matrix
from posture.prior import PriorModel

logger = logging.getLogger(__name__)


class EstimatorMethod(str, Enum):
    """Etiqueta del estimador que produjo una estimación"""
    PINV = "pinv"
    MAP_NOISELESS = "map"
    MAP_NULLSPACE = "nullspace"
    MAP_LAGRANGIAN = "lagrangian"
    CONDITIONAL_GAUSSIAN = "conditional"
    MVE_INFORMATION = "information"
    MVE_SMW = "mve"


def is_selection_matrix(H: np.ndarray) -> bool:
    """True si cada fila es un vector distinto de la base canónica"""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] == 0:
        return False
    if not np.all((H == 0) | (H == 1)):
        return False
    if not np.all((H == 1).sum(axis=1) == 1):
        return False
    return len(set(np.argmax(H, axis=1).tolist())) == H.shape[0]


def _check_full_row_rank(H: np.ndarray):
    m = H.shape[0]
    if m == 0:
        return
    rank = np.linalg.matrix_rank(H)
    if rank < m:
        raise RankDeficientError(f"H tiene rango {rank} menor que m={m}")


@dataclass(frozen=True)
class MeasurementModel:
    """
    Modelo lineal de medición y = Hx + ν, con ν ~ N(0, R)

    R por defecto es cero (mediciones sin ruido). channels nombra las filas
    de H (para matrices de selección, los DoFs medidos).
    """
    H: np.ndarray
    R: Optional[np.ndarray] = None
    is_selection: Optional[bool] = None
    channels: Tuple[str, ...] = ()

    def __post_init__(self):
        H = np.array(self.H, dtype=float)
        if H.ndim != 2:
            raise DimensionMismatchError(f"H debe ser una matriz, llegó un arreglo de {H.ndim} dimensiones")
        m, n = H.shape

        R = np.zeros((m, m)) if self.R is None else np.array(self.R, dtype=float)
        if R.shape != (m, m):
            raise DimensionMismatchError(f"R tiene forma {R.shape}, se esperaba {(m, m)}")
        if m:
            scale = max(np.abs(R).max(), 1.0)
            if np.abs(R - R.T).max() > 1e-10 * scale:
                raise ValueError("R no es simétrica")
            R = 0.5 * (R + R.T)
            if np.linalg.eigvalsh(R).min() < -1e-10 * scale:
                raise ValueError("R no es semidefinida positiva")
            rank = np.linalg.matrix_rank(H)
            if rank < min(m, n):
                raise RankDeficientError(f"H tiene rango {rank}, se esperaba {min(m, n)}")
        if m > n:
            logger.debug("Modelo sobredeterminado: m=%d > n=%d", m, n)

        detected = is_selection_matrix(H)
        if self.is_selection and not detected:
            raise NotSelectionMatrixError("H no es una matriz de selección")
        if self.channels and len(self.channels) != m:
            raise DimensionMismatchError(f"Se dieron {len(self.channels)} canales para {m} filas de H")

        H.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "is_selection", detected)
        object.__setattr__(self, "channels", tuple(self.channels))

    @classmethod
    def from_selection(cls, model: HandModel, names: Sequence[str],
                       R: Optional[np.ndarray] = None) -> "MeasurementModel":
        """Guante ideal que mide directamente los DoFs indicados"""
        return cls(H=selection_matrix(model, names), R=R, channels=tuple(names))

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def has_noise(self) -> bool:
        return bool(np.any(self.R != 0))

    @property
    def measured_indices(self) -> np.ndarray:
        if not self.is_selection:
            raise NotSelectionMatrixError("Solo una matriz de selección tiene DoFs medidos directamente")
        return np.argmax(self.H, axis=1)

    def with_noise(self, R: np.ndarray) -> "MeasurementModel":
        return replace(self, R=R)


@dataclass(frozen=True)
class Estimate:
    """
    Resultado de un estimador

    x_hat tiene forma (n,) para una medición o (k, n) para un lote.
    multipliers solo lo llena el camino lagrangiano.
    """
    x_hat: np.ndarray
    method: EstimatorMethod
    posterior_cov: Optional[np.ndarray] = None
    multipliers: Optional[np.ndarray] = field(default=None, repr=False)


def _as_batch(y, m: int) -> Tuple[np.ndarray, bool]:
    Y = np.asarray(y, dtype=float)
    single = Y.ndim == 1
    Y = np.atleast_2d(Y)
    if Y.shape[1] != m:
        raise DimensionMismatchError(f"La medición tiene {Y.shape[1]} canales, H tiene {m} filas")
    return Y, single


def _shape_like(X: np.ndarray, single: bool) -> np.ndarray:
    return X[0] if single else X


def _symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _prior_factor(prior: PriorModel):
    try:
        return scipy.linalg.cho_factor(prior.cov)
    except np.linalg.LinAlgError:
        raise SingularPriorError("P_o no es invertible")


def null_space_basis(H: np.ndarray) -> np.ndarray:
    """
    Base ortonormal del espacio nulo de H (n × (n−m))

    Cada columna se orienta con su componente de mayor valor absoluto positiva.
    """
    basis = scipy.linalg.null_space(np.asarray(H, dtype=float))
    if basis.shape[1]:
        pivots = np.argmax(np.abs(basis), axis=0)
        signs = np.sign(basis[pivots, np.arange(basis.shape[1])])
        basis = basis * np.where(signs == 0, 1.0, signs)
    return basis


def _innovation_factor(S: np.ndarray, noiseless: bool, condition_limit: Optional[float]):
    limit = get_settings().condition_limit if condition_limit is None else condition_limit
    error_cls = IllConditionedGramError if noiseless else IllConditionedInnovationError
    matrix_name = "H P_o Hᵀ" if noiseless else "H P_o Hᵀ + R"
    condition = np.linalg.cond(S)
    if not np.isfinite(condition) or condition > limit:
        raise error_cls(f"{matrix_name} mal condicionada (cond={condition:.3e} > {limit:.0e})")
    try:
        return scipy.linalg.cho_factor(S)
    except np.linalg.LinAlgError:
        raise error_cls(f"{matrix_name} no es definida positiva")


def _gaussian_update(prior: PriorModel, H: np.ndarray, R: np.ndarray, Y: Optional[np.ndarray],
                     condition_limit: Optional[float]) -> Tuple[Optional[np.ndarray], np.ndarray]:
    """x̂ = μ_o − P_oHᵀ(HP_oHᵀ + R)⁻¹(Hμ_o − y) y P_p = P_o − P_oHᵀ(HP_oHᵀ + R)⁻¹HP_o"""
    P = prior.cov
    HP = H @ P
    S = _symmetrize(HP @ H.T + R)
    factor = _innovation_factor(S, noiseless=not np.any(R != 0), condition_limit=condition_limit)

    # S⁻¹HP = (P_oHᵀS⁻¹)ᵀ
    gain_t = scipy.linalg.cho_solve(factor, HP)
    posterior = _symmetrize(P - HP.T @ gain_t)
    if Y is None:
        return None, posterior
    X = prior.mu + (Y - H @ prior.mu) @ gain_t
    return X, posterior


def estimate_pinv(H: np.ndarray, y: np.ndarray) -> Estimate:
    """
    Solución de norma euclídea mínima x̂ = H†y

    Para matrices de selección se usa directamente x̂ = Hᵀy.
    """
    H = np.asarray(H, dtype=float)
    _check_full_row_rank(H)
    Y, single = _as_batch(y, H.shape[0])
    if is_selection_matrix(H):
        X = Y @ H
    else:
        X = Y @ scipy.linalg.pinv(H).T
    return Estimate(x_hat=_shape_like(X, single), method=EstimatorMethod.PINV)


def general_solution(H: np.ndarray, y: np.ndarray, xi: np.ndarray,
                     basis: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Solución general H†y + N_h·ξ del sistema subdeterminado

    Args:
        H: Matriz de medición de rango completo por filas
        y: Medición (m,)
        xi: Vector libre de tamaño n − m
        basis: Base del espacio nulo; por defecto la ortonormal de null_space_basis

    Returns:
        Vector (n,) que satisface H·x = y para cualquier ξ
    """
    H = np.asarray(H, dtype=float)
    _check_full_row_rank(H)
    basis = null_space_basis(H) if basis is None else np.asarray(basis, dtype=float)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.size != basis.shape[1]:
        raise DimensionMismatchError(f"ξ debe tener {basis.shape[1]} componentes, tiene {xi.size}")
    return scipy.linalg.pinv(H) @ np.asarray(y, dtype=float) + basis @ xi


def estimate_map_noiseless(prior: PriorModel, H: np.ndarray, y: np.ndarray,
                           condition_limit: Optional[float] = None) -> Estimate:
    """
    Máximo de la pdf a priori sujeto a Hx = y (solución lagrangiana cerrada)

    x̂ = μ_o − P_oHᵀ(HP_oHᵀ)⁻¹(Hμ_o − y), con P_p = P_o − P_oHᵀ(HP_oHᵀ)⁻¹HP_o
    """
    H = np.asarray(H, dtype=float)
    Y, single = _as_batch(y, H.shape[0])
    X, posterior = _gaussian_update(prior, H, np.zeros((H.shape[0], H.shape[0])), Y, condition_limit)
    return Estimate(x_hat=_shape_like(X, single), method=EstimatorMethod.MAP_NOISELESS,
                    posterior_cov=posterior)


def estimate_map_nullspace(prior: PriorModel, H: np.ndarray, y: np.ndarray) -> Estimate:
    """
    Misma estimación que estimate_map_noiseless, resolviendo en el espacio nulo de H

    ξ̂ = (N_hᵀP_o⁻¹N_h)⁻¹N_hᵀP_o⁻¹(μ_o − H†y) y x̂ = H†y + N_hξ̂.
    La covarianza a posteriori es N_h(N_hᵀP_o⁻¹N_h)⁻¹N_hᵀ.
    """
    H = np.asarray(H, dtype=float)
    _check_full_row_rank(H)
    factor = _prior_factor(prior)
    Y, single = _as_batch(y, H.shape[0])
    n = H.shape[1]

    base = Y @ scipy.linalg.pinv(H).T
    basis = null_space_basis(H)
    if basis.shape[1] == 0:
        return Estimate(x_hat=_shape_like(base, single), method=EstimatorMethod.MAP_NULLSPACE,
                        posterior_cov=np.zeros((n, n)))

    weighted = scipy.linalg.cho_solve(factor, basis)
    gram = _symmetrize(basis.T @ weighted)
    xi = scipy.linalg.solve(gram, ((prior.mu - base) @ weighted).T, assume_a="pos").T
    X = base + xi @ basis.T
    posterior = _symmetrize(basis @ scipy.linalg.solve(gram, basis.T, assume_a="pos"))
    return Estimate(x_hat=_shape_like(X, single), method=EstimatorMethod.MAP_NULLSPACE,
                    posterior_cov=posterior)


def estimate_map_lagrangian(prior: PriorModel, H: np.ndarray, y: np.ndarray) -> Estimate:
    """
    Resuelve el sistema KKT del lagrangiano L = ½(x−μ_o)ᵀP_o⁻¹(x−μ_o) + λᵀ(Hx − y)

        [P_o⁻¹  Hᵀ] [x]   [P_o⁻¹μ_o]
        [H      0 ] [λ] = [y       ]

    Devuelve también los multiplicadores λ.
    """
    H = np.asarray(H, dtype=float)
    _check_full_row_rank(H)
    factor = _prior_factor(prior)
    Y, single = _as_batch(y, H.shape[0])
    m, n = H.shape
    k = Y.shape[0]

    precision = _symmetrize(scipy.linalg.cho_solve(factor, np.eye(n)))
    kkt = np.block([[precision, H.T], [H, np.zeros((m, m))]])
    rhs = np.vstack([np.tile((precision @ prior.mu)[:, None], (1, k)), Y.T])
    unit = np.vstack([np.eye(n), np.zeros((m, n))])

    solution = scipy.linalg.solve(kkt, np.hstack([rhs, unit]), assume_a="sym")
    X = solution[:n, :k].T
    multipliers = solution[n:, :k].T
    posterior = _symmetrize(solution[:n, k:])
    return Estimate(x_hat=_shape_like(X, single), method=EstimatorMethod.MAP_LAGRANGIAN,
                    posterior_cov=posterior, multipliers=_shape_like(multipliers, single))


def estimate_conditional_gaussian(prior: PriorModel, selection: MeasurementModel, y: np.ndarray) -> Estimate:
    """
    Media condicional E[X₂ | X₁ = y] para guantes de sensores de un solo DoF

    Los DoFs medidos toman exactamente el valor y; el resto
    μ_o2 + P_o21 P_o11⁻¹ (y − μ_o1).
    """
    if not selection.is_selection:
        raise NotSelectionMatrixError("La media condicional requiere una matriz de selección")
    if selection.has_noise:
        logger.warning("La media condicional ignora R; usa 'mve' para mediciones con ruido")

    Y, single = _as_batch(y, selection.m)
    measured = selection.measured_indices
    rest = np.setdiff1d(np.arange(selection.n), measured)
    P = prior.cov

    try:
        block = scipy.linalg.cho_factor(P[np.ix_(measured, measured)])
    except np.linalg.LinAlgError:
        raise SingularMeasuredBlockError("El bloque P_o11 de los DoFs medidos no es invertible")

    regression = scipy.linalg.cho_solve(block, P[np.ix_(measured, rest)])
    X = np.empty((Y.shape[0], selection.n))
    X[:, measured] = Y
    X[:, rest] = prior.mu[rest] + (Y - prior.mu[measured]) @ regression

    posterior = np.zeros_like(P)
    posterior[np.ix_(rest, rest)] = _symmetrize(P[np.ix_(rest, rest)] - P[np.ix_(rest, measured)] @ regression)
    return Estimate(x_hat=_shape_like(X, single), method=EstimatorMethod.CONDITIONAL_GAUSSIAN,
                    posterior_cov=posterior)


def estimate_mve(prior: PriorModel, model: MeasurementModel, y: np.ndarray,
                 condition_limit: Optional[float] = None) -> Estimate:
    """
    Estimación de mínima varianza (forma Sherman-Morrison-Woodbury)

    x̂ = μ_o − P_oHᵀ(HP_oHᵀ + R)⁻¹(Hμ_o − y). Con R = 0 coincide con
    estimate_map_noiseless; solo requiere invertir HP_oHᵀ + R.
    """
    Y, single = _as_batch(y, model.m)
    X, posterior = _gaussian_update(prior, model.H, model.R, Y, condition_limit)
    return Estimate(x_hat=_shape_like(X, single), method=EstimatorMethod.MVE_SMW, posterior_cov=posterior)


def estimate_mve_information(prior: PriorModel, model: MeasurementModel, y: np.ndarray) -> Estimate:
    """
    MVE en forma de información

    x̂ = (P_o⁻¹ + HᵀR⁻¹H)⁻¹(HᵀR⁻¹y + P_o⁻¹μ_o). Necesita P_o y R invertibles;
    sirve para validar la forma SMW y para modelos sobredeterminados.
    """
    prior_factor = _prior_factor(prior)
    if not model.has_noise:
        raise SingularNoiseError("R = 0 no es invertible")
    try:
        noise_factor = scipy.linalg.cho_factor(model.R)
    except np.linalg.LinAlgError:
        raise SingularNoiseError("R no es invertible")

    Y, single = _as_batch(y, model.m)
    n = model.n
    precision = _symmetrize(scipy.linalg.cho_solve(prior_factor, np.eye(n)))
    weighted_h = scipy.linalg.cho_solve(noise_factor, model.H)  # R⁻¹H
    information = _symmetrize(precision + model.H.T @ weighted_h)
    rhs = Y @ weighted_h + precision @ prior.mu

    try:
        info_factor = scipy.linalg.cho_factor(information)
    except np.linalg.LinAlgError:
        raise SingularPriorError("P_o⁻¹ + HᵀR⁻¹H no es definida positiva")
    X = scipy.linalg.cho_solve(info_factor, rhs.T).T
    posterior = _symmetrize(scipy.linalg.cho_solve(info_factor, np.eye(n)))
    return Estimate(x_hat=_shape_like(X, single), method=EstimatorMethod.MVE_INFORMATION,
                    posterior_cov=posterior)


def posterior_covariance(prior: PriorModel, model: MeasurementModel,
                         condition_limit: Optional[float] = None) -> np.ndarray:
    """
    Covarianza a posteriori P_p = P_o − P_oHᵀ(HP_oHᵀ + R)⁻¹HP_o

    Sin mediciones (m = 0) devuelve una copia de P_o.
    """
    if model.m == 0:
        return np.array(prior.cov)
    _, posterior = _gaussian_update(prior, model.H, model.R, None, condition_limit)
    return posterior


def estimate(method, prior: PriorModel, model: MeasurementModel, y: np.ndarray) -> Estimate:
    """
    Ejecuta el estimador indicado por su etiqueta

    Args:
        method: EstimatorMethod o su valor ('pinv', 'mve', 'conditional', ...)
        prior: Modelo a priori
        model: Modelo de medición
        y: Medición (m,) o lote (k, m)
    """
    method = EstimatorMethod(method)
    if method is EstimatorMethod.PINV:
        return estimate_pinv(model.H, y)
    if method is EstimatorMethod.MAP_NOISELESS:
        return estimate_map_noiseless(prior, model.H, y)
    if method is EstimatorMethod.MAP_NULLSPACE:
        return estimate_map_nullspace(prior, model.H, y)
    if method is EstimatorMethod.MAP_LAGRANGIAN:
        return estimate_map_lagrangian(prior, model.H, y)
    if method is EstimatorMethod.CONDITIONAL_GAUSSIAN:
        return estimate_conditional_gaussian(prior, model, y)
    if method is EstimatorMethod.MVE_INFORMATION:
        return estimate_mve_information(prior, model, y)
    return estimate_mve(prior, model, y)
