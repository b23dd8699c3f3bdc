"""
Métricas de error y batería de tests estadísticos
Lilliefors, Levene, t de Student (varianzas iguales y Welch-Satterthwaite),
U de Mann-Whitney y la cascada que elige entre ellos
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import comb
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from posture.config import get_settings
from posture.errors import (
    DimensionMismatchError,
    NonFiniteInputError,
    TooFewDistinctError,
    TooFewSamplesError,
)
from posture.prior import PoseSet

logger = logging.getLogger(__name__)

SIGNIFICANCE = 0.05
P_FLOOR = 1e-4
EXACT_U_LIMIT = 20
_TABLE_CHUNK = 2000


class TestKind(str, Enum):
    __test__ = False

    TEQ = "Teq"
    TNEQ = "Tneq"
    U = "U"
    LILLIEFORS = "Lilliefors"
    LEVENE = "Levene"


def reported_p_value(p: float) -> float:
    """p-valor como se publica: 0 si p < 1e-4, si no con 4 decimales"""
    return 0.0 if p < P_FLOOR else round(float(p), 4)


@dataclass(frozen=True)
class TestResult:
    """Resultado de un test de hipótesis"""
    __test__ = False

    statistic: float
    p_value: float
    test_kind: TestKind
    df: Optional[float] = None

    @property
    def significant_at_5pct(self) -> bool:
        return self.p_value < SIGNIFICANCE

    @property
    def reported_p(self) -> float:
        return reported_p_value(self.p_value)

    def to_dict(self) -> dict:
        return {
            "test_kind": self.test_kind.value,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "df": self.df,
            "reported_p": self.reported_p,
            "significant_at_5pct": self.significant_at_5pct,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TestResult":
        return cls(statistic=data["statistic"], p_value=data["p_value"],
                   test_kind=TestKind(data["test_kind"]), df=data.get("df"))


def _sample_std(values: np.ndarray, axis: int = -1) -> np.ndarray:
    if values.shape[axis] < 2:
        return np.zeros(np.delete(values.shape, axis)) if values.ndim > 1 else np.float64(0.0)
    return values.std(axis=axis, ddof=1)


@dataclass(frozen=True)
class ErrorSummary:
    """
    Errores absolutos de estimación

    per_pose_errors: (P,) error medio de DoFs por postura
    per_dof_errors: (n, P) error absoluto por DoF y postura
    """
    per_pose_errors: np.ndarray
    per_dof_errors: np.ndarray
    dof_names: Tuple[str, ...] = ()

    @property
    def pose_mean(self) -> float:
        return float(self.per_pose_errors.mean())

    @property
    def pose_std(self) -> float:
        return float(_sample_std(self.per_pose_errors))

    @property
    def pose_max(self) -> float:
        return float(self.per_pose_errors.max())

    @property
    def dof_mean(self) -> np.ndarray:
        return self.per_dof_errors.mean(axis=1)

    @property
    def dof_std(self) -> np.ndarray:
        return _sample_std(self.per_dof_errors, axis=1)

    @property
    def dof_max(self) -> np.ndarray:
        return self.per_dof_errors.max(axis=1)

    def to_dict(self) -> dict:
        return {
            "dof_names": list(self.dof_names),
            "pose": {"mean": self.pose_mean, "std": self.pose_std, "max": self.pose_max},
            "dof": {
                "mean": self.dof_mean.tolist(),
                "std": np.asarray(self.dof_std).tolist(),
                "max": self.dof_max.tolist(),
            },
            "per_pose_errors": self.per_pose_errors.tolist(),
            "per_dof_errors": self.per_dof_errors.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ErrorSummary":
        per_dof = np.array(data["per_dof_errors"], dtype=float)
        per_dof = per_dof.reshape(len(data["dof_names"]), -1) if per_dof.size == 0 else per_dof
        return cls(per_pose_errors=np.array(data["per_pose_errors"], dtype=float),
                   per_dof_errors=per_dof, dof_names=tuple(data["dof_names"]))


def pose_errors(estimates: PoseSet, reference: PoseSet) -> ErrorSummary:
    """
    Errores por postura (media de los errores absolutos de DoF) y por DoF

    Args:
        estimates: Posturas estimadas
        reference: Posturas de referencia, mismas filas y mismos DoFs
    """
    if estimates.model.names != reference.model.names:
        raise DimensionMismatchError("Las estimaciones y la referencia usan modelos de mano distintos")
    if estimates.poses.shape != reference.poses.shape:
        raise DimensionMismatchError(
            f"Estimaciones {estimates.poses.shape} y referencia {reference.poses.shape} no coinciden")

    absolute = np.abs(estimates.poses - reference.poses)
    return ErrorSummary(per_pose_errors=absolute.mean(axis=1), per_dof_errors=absolute.T.copy(),
                        dof_names=reference.model.names)


def _one_sample(sample, minimum: int) -> np.ndarray:
    values = np.asarray(sample, dtype=float).ravel()
    if not np.all(np.isfinite(values)):
        raise NonFiniteInputError("La muestra contiene valores no finitos")
    if values.size < minimum:
        raise TooFewSamplesError(f"Se necesitan al menos {minimum} observaciones, hay {values.size}")
    return values


def _two_samples(a, b, minimum: int) -> Tuple[np.ndarray, np.ndarray]:
    return _one_sample(a, minimum), _one_sample(b, minimum)


def _ks_against_fitted_normal(rows: np.ndarray) -> np.ndarray:
    """Estadístico KS de cada fila contra la normal con media y desvío estimados"""
    size = rows.shape[1]
    centered = rows - rows.mean(axis=1, keepdims=True)
    z = np.sort(centered / rows.std(axis=1, ddof=1, keepdims=True), axis=1)
    cdf = stats.norm.cdf(z)
    above = np.arange(1, size + 1) / size - cdf
    below = cdf - np.arange(size) / size
    return np.maximum(above.max(axis=1), below.max(axis=1))


@lru_cache(maxsize=64)
def lilliefors_null_table(size: int, replicates: Optional[int] = None, seed: Optional[int] = None) -> np.ndarray:
    """
    Distribución nula del estadístico de Lilliefors para muestras de tamaño `size`

    Se genera por Monte Carlo con semilla fija y se guarda en POSTURE_CACHE_DIR;
    las llamadas siguientes leen el archivo.

    Returns:
        Estadísticos nulos ordenados de menor a mayor (solo lectura)
    """
    settings = get_settings()
    replicates = settings.lilliefors_replicates if replicates is None else replicates
    seed = settings.lilliefors_seed if seed is None else seed
    path = settings.cache_dir / f"lilliefors_n{size}_r{replicates}_s{seed}.npy"

    table = None
    if path.exists():
        try:
            table = np.load(path)
            if table.shape != (replicates,):
                table = None
        except (OSError, ValueError) as e:
            logger.warning("Tabla de Lilliefors ilegible en %s: %s", path, e)
            table = None

    if table is None:
        logger.info("Generando tabla de Lilliefors n=%d (%d réplicas)", size, replicates)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, size])))
        parts = []
        for start in range(0, replicates, _TABLE_CHUNK):
            count = min(_TABLE_CHUNK, replicates - start)
            parts.append(_ks_against_fitted_normal(rng.standard_normal((count, size))))
        table = np.sort(np.concatenate(parts))
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            np.save(path, table)
        except OSError as e:
            logger.warning("No se pudo guardar la tabla de Lilliefors en %s: %s", path, e)

    table.setflags(write=False)
    return table


def _table_p_value(statistic: float, table: np.ndarray) -> float:
    levels = (np.arange(1, table.size + 1) - 0.5) / table.size
    cdf = np.interp(statistic, table, levels, left=0.0, right=1.0)
    return float(np.clip(1.0 - cdf, 0.0, 1.0))


def lilliefors_normality(sample, replicates: Optional[int] = None, seed: Optional[int] = None) -> TestResult:
    """
    Test de Lilliefors: KS contra una normal con media y varianza estimadas

    El p-valor se interpola en la tabla Monte Carlo del tamaño de la muestra.
    """
    values = _one_sample(sample, 4)
    if np.ptp(values) == 0:
        raise TooFewDistinctError("Muestra constante: la normalidad no es evaluable")
    statistic = float(_ks_against_fitted_normal(values[None, :])[0])
    table = lilliefors_null_table(values.size, replicates, seed)
    return TestResult(statistic=statistic, p_value=_table_p_value(statistic, table),
                      test_kind=TestKind.LILLIEFORS)


def levene_variance_test(a, b, center: str = "mean") -> TestResult:
    """
    Test de Levene de homogeneidad de varianzas

    center='mean' es el Levene clásico; 'median' da la variante de Brown-Forsythe.
    """
    a, b = _two_samples(a, b, 2)
    statistic, p_value = stats.levene(a, b, center=center)
    if not np.isfinite(statistic):
        # desvíos absolutos todos nulos
        statistic, p_value = 0.0, 1.0
    return TestResult(statistic=float(statistic), p_value=float(p_value),
                      test_kind=TestKind.LEVENE, df=float(a.size + b.size - 2))


def welch_satterthwaite_df(a, b) -> float:
    """Grados de libertad efectivos de Satterthwaite"""
    a, b = _two_samples(a, b, 2)
    s1 = a.var(ddof=1) / a.size
    s2 = b.var(ddof=1) / b.size
    denominator = s1 ** 2 / (a.size - 1) + s2 ** 2 / (b.size - 1)
    if denominator == 0:
        return float(a.size + b.size - 2)
    return float((s1 + s2) ** 2 / denominator)


def _t_test(a, b, equal_var: bool) -> TestResult:
    a, b = _two_samples(a, b, 2)
    kind = TestKind.TEQ if equal_var else TestKind.TNEQ
    df = float(a.size + b.size - 2) if equal_var else welch_satterthwaite_df(a, b)

    if np.ptp(a) == 0 and np.ptp(b) == 0:
        difference = a[0] - b[0]
        if difference == 0:
            return TestResult(statistic=0.0, p_value=1.0, test_kind=kind, df=df)
        return TestResult(statistic=float(np.copysign(np.inf, difference)), p_value=0.0, test_kind=kind, df=df)

    result = stats.ttest_ind(a, b, equal_var=equal_var)
    return TestResult(statistic=float(result.statistic), p_value=float(result.pvalue), test_kind=kind, df=df)


def t_test_equal_var(a, b) -> TestResult:
    """t de Student de dos colas con varianza combinada (df = n₁ + n₂ − 2)"""
    return _t_test(a, b, equal_var=True)


def t_test_welch(a, b) -> TestResult:
    """t de dos colas para varianzas distintas (Behrens-Fisher, Welch-Satterthwaite)"""
    return _t_test(a, b, equal_var=False)


def _exact_rank_sum_p(ranks: np.ndarray, n1: int) -> float:
    """
    p-valor exacto de dos colas contando todas las asignaciones de rangos

    Con empates se usan rangos medios; se duplican para trabajar con enteros.
    """
    doubled = np.rint(2 * ranks).astype(np.int64)
    total = int(doubled.sum())
    ways = np.zeros((n1 + 1, total + 1), dtype=np.int64)
    ways[0, 0] = 1
    for rank in doubled:
        for k in range(n1, 0, -1):
            ways[k, rank:] += ways[k - 1, :total + 1 - rank]

    distribution = ways[n1] / comb(doubled.size, n1)
    observed = int(doubled[:n1].sum())
    lower = distribution[:observed + 1].sum()
    upper = distribution[observed:].sum()
    return float(min(1.0, 2.0 * min(lower, upper)))


def mann_whitney_u(a, b) -> TestResult:
    """
    U de Mann-Whitney de dos colas

    Enumeración exacta si n₁ + n₂ <= 20; si no, aproximación normal con
    corrección por empates y por continuidad. El estadístico es min(U₁, U₂).
    """
    a, b = _two_samples(a, b, 2)
    pooled = np.concatenate([a, b])
    ranks = stats.rankdata(pooled)
    u1 = float(ranks[:a.size].sum() - a.size * (a.size + 1) / 2)
    u2 = a.size * b.size - u1

    if pooled.size <= EXACT_U_LIMIT:
        p_value = _exact_rank_sum_p(ranks, a.size)
    elif np.ptp(pooled) == 0:
        p_value = 1.0
    else:
        p_value = float(stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic",
                                           use_continuity=True).pvalue)
    return TestResult(statistic=min(u1, u2), p_value=p_value, test_kind=TestKind.U)


def select_and_compare(a, b, alpha: float = SIGNIFICANCE) -> TestResult:
    """
    Elige el test de comparación y lo ejecuta

    Lilliefors sobre ambas muestras; si alguna no es normal (o es constante) → U.
    Si ambas son normales, Levene: varianzas distintas → Tneq, si no → Teq.
    """
    a, b = _two_samples(a, b, 4)

    for sample in (a, b):
        try:
            normality = lilliefors_normality(sample)
        except TooFewDistinctError:
            return mann_whitney_u(a, b)
        if normality.p_value < alpha:
            return mann_whitney_u(a, b)

    if levene_variance_test(a, b).p_value < alpha:
        return t_test_welch(a, b)
    return t_test_equal_var(a, b)
