"""
Simulador de guante
Genera mediciones sintéticas y = Hx + ν a partir de posturas de referencia
y corre el experimento de reconstrucción completo
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats as scipy_stats

from posture.config import get_settings
from posture.errors import DimensionMismatchError
from posture.estimators import EstimatorMethod, MeasurementModel, estimate
from posture.hand_model import HandModel, default_hand_model
from posture.prior import PoseSet, PriorModel, build_prior
from posture.reporting import EvaluationReport, build_report
from posture.stats import pose_errors

logger = logging.getLogger(__name__)

RNG_NAME = "numpy.PCG64"
DATASET_STREAM = 1

# Guante ideal que solo mide las articulaciones metacarpianas
METACARPAL_DOFS = ("TM", "IM", "MM", "RM", "LM")
DEFAULT_NOISE_SIGMA_DEG = 7.0
DEFAULT_TRAIN_SIZE = 114
DEFAULT_TEST_SIZE = 54

DEFAULT_METHODS = (EstimatorMethod.PINV, EstimatorMethod.MVE_SMW)

# Postura media de agarre (grados) para el prior sintético
TYPICAL_GRASP_DEG = {
    "TA": 30.0, "TR": 20.0, "TM": 25.0, "TI": 20.0,
    "IA": 5.0, "IM": 40.0, "IP": 45.0,
    "MM": 45.0, "MP": 50.0,
    "RA": 3.0, "RM": 45.0, "RP": 50.0,
    "LA": 8.0, "LM": 45.0, "LP": 45.0,
}


@dataclass(frozen=True)
class SimulationConfig:
    """
    Parámetros de una simulación

    noise_sigma_deg es un desvío común o uno por canal; noise_cov, si se da,
    es la covarianza completa del ruido y reemplaza a noise_sigma_deg.
    """
    measurement: MeasurementModel
    noise_sigma_deg: Union[float, Sequence[float]] = 0.0
    noise_cov: Optional[np.ndarray] = None
    seed: Optional[int] = None
    trials_per_pose: int = 1

    def __post_init__(self):
        m = self.measurement.m
        sigma = np.array(self.noise_sigma_deg, dtype=float)
        if sigma.ndim == 0:
            sigma = np.full(m, float(sigma))
        if sigma.shape != (m,):
            raise DimensionMismatchError(f"Se dieron {sigma.size} desvíos para {m} canales")
        if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
            raise ValueError("El desvío del ruido debe ser finito y >= 0")
        if self.trials_per_pose < 1:
            raise ValueError("trials_per_pose debe ser >= 1")

        cov = None
        if self.noise_cov is not None:
            cov = np.array(self.noise_cov, dtype=float)
            if cov.shape != (m, m):
                raise DimensionMismatchError(f"La covarianza del ruido tiene forma {cov.shape}, se esperaba {(m, m)}")
            cov = 0.5 * (cov + cov.T)
            if m and np.linalg.eigvalsh(cov).min() < -1e-10 * max(np.abs(cov).max(), 1.0):
                raise ValueError("La covarianza del ruido no es semidefinida positiva")

        seed = get_settings().seed if self.seed is None else int(self.seed)
        object.__setattr__(self, "noise_sigma_deg", sigma)
        object.__setattr__(self, "noise_cov", cov)
        object.__setattr__(self, "seed", seed)

    @property
    def noise_covariance(self) -> np.ndarray:
        if self.noise_cov is not None:
            return self.noise_cov
        return np.diag(self.noise_sigma_deg ** 2)

    @property
    def estimation_model(self) -> MeasurementModel:
        """Modelo de medición con R igual a la covarianza del ruido simulado"""
        return self.measurement.with_noise(self.noise_covariance)

    def describe(self) -> dict:
        """Eco de la configuración para el encabezado del reporte"""
        if self.measurement.is_selection and self.measurement.channels:
            h_spec = {"measured_dofs": list(self.measurement.channels)}
        else:
            h_spec = {"H": self.measurement.H.tolist()}
        noise = {"R": self.noise_cov.tolist()} if self.noise_cov is not None \
            else {"sigma_deg": self.noise_sigma_deg.tolist()}
        return {
            "seed": self.seed,
            "rng": RNG_NAME,
            "trials_per_pose": self.trials_per_pose,
            "measurement": h_spec,
            "noise": noise,
        }


@dataclass(frozen=True)
class MeasurementSet:
    """Mediciones simuladas: una fila por (postura, ensayo), en ese orden"""
    values: np.ndarray
    pose_index: np.ndarray
    trial_index: np.ndarray
    channels: tuple = ()

    @property
    def count(self) -> int:
        return self.values.shape[0]


def metacarpal_glove_config(model: Optional[HandModel] = None, sigma_deg: float = DEFAULT_NOISE_SIGMA_DEG,
                            seed: Optional[int] = None) -> SimulationConfig:
    """Guante ideal sobre {TM, IM, MM, RM, LM} con ruido gaussiano de 7°"""
    model = model or default_hand_model()
    measurement = MeasurementModel.from_selection(model, METACARPAL_DOFS)
    return SimulationConfig(measurement=measurement, noise_sigma_deg=sigma_deg, seed=seed)


def _draw_noise(rng: np.random.Generator, cfg: SimulationConfig, count: int) -> np.ndarray:
    m = cfg.measurement.m
    if cfg.noise_cov is not None:
        if not np.any(cfg.noise_cov):
            return np.zeros((count, m))
        return rng.multivariate_normal(np.zeros(m), cfg.noise_cov, size=count, method="eigh")
    if not np.any(cfg.noise_sigma_deg):
        return np.zeros((count, m))
    return rng.standard_normal((count, m)) * cfg.noise_sigma_deg


def simulate_measurements(poses: PoseSet, cfg: SimulationConfig) -> MeasurementSet:
    """
    Mediciones H·x + ν para cada postura y ensayo

    Cada postura usa su propio subflujo (SeedSequence(seed).spawn), así que el
    resultado es reproducible y no depende del orden de evaluación.
    """
    if poses.model.n != cfg.measurement.n:
        raise DimensionMismatchError(
            f"Las posturas tienen {poses.model.n} DoFs y H tiene {cfg.measurement.n} columnas")

    trials = cfg.trials_per_pose
    clean = poses.poses @ cfg.measurement.H.T
    streams = np.random.SeedSequence(cfg.seed).spawn(poses.count)

    values = np.empty((poses.count * trials, cfg.measurement.m))
    for index, stream in enumerate(streams):
        rng = np.random.Generator(np.random.PCG64(stream))
        rows = slice(index * trials, (index + 1) * trials)
        values[rows] = clean[index] + _draw_noise(rng, cfg, trials)

    return MeasurementSet(
        values=values,
        pose_index=np.repeat(np.arange(poses.count), trials),
        trial_index=np.tile(np.arange(trials), poses.count),
        channels=cfg.measurement.channels,
    )


def synergy_prior(model: HandModel, leading_variance: float = 600.0, ratio: float = 0.6,
                  seed: Optional[int] = None, mean: Optional[np.ndarray] = None) -> PriorModel:
    """
    Prior sintético con estructura de sinergias

    Los autovalores decaen geométricamente (λ_k = leading_variance · ratio^k) y
    las sinergias son una base ortonormal aleatoria.
    """
    if leading_variance <= 0 or not 0 < ratio <= 1:
        raise ValueError("Se necesita leading_variance > 0 y 0 < ratio <= 1")
    seed = get_settings().seed if seed is None else seed
    rng = np.random.Generator(np.random.PCG64(seed))

    eigenvalues = leading_variance * ratio ** np.arange(model.n)
    basis = scipy_stats.ortho_group.rvs(model.n, random_state=rng) if model.n > 1 else np.ones((1, 1))
    cov = (basis * eigenvalues) @ basis.T
    if mean is None:
        mean = np.array([TYPICAL_GRASP_DEG.get(name, 0.0) for name in model.names])
    return PriorModel(mu=mean, cov=0.5 * (cov + cov.T), sample_count=0)


def sample_poses(prior: PriorModel, model: HandModel, count: int, rng: np.random.Generator,
                 source: str = "") -> PoseSet:
    """count posturas i.i.d. de N(μ_o, P_o)"""
    if prior.n != model.n:
        raise DimensionMismatchError(f"El prior tiene {prior.n} DoFs y el modelo {model.n}")
    draws = rng.multivariate_normal(prior.mu, prior.cov, size=count, method="eigh")
    return PoseSet(model=model, poses=draws, source=source)


def evaluate_with_prior(prior: PriorModel, test: PoseSet, cfg: SimulationConfig,
                        methods: Sequence = DEFAULT_METHODS, compare: bool = True) -> EvaluationReport:
    """
    Simula, estima con cada método y arma el reporte de errores

    Los estimadores usan R igual a la covarianza del ruido simulado. Con
    varios ensayos por postura, cada ensayo cuenta como una postura reconstruida.
    """
    methods = [EstimatorMethod(method) for method in methods]
    if prior.n != test.model.n:
        raise DimensionMismatchError(f"El prior tiene {prior.n} DoFs y las posturas {test.model.n}")

    measurements = simulate_measurements(test, cfg)
    model = cfg.estimation_model
    reference = PoseSet(model=test.model, poses=test.poses[measurements.pose_index], source=test.source)

    summaries = {}
    for method in methods:
        result = estimate(method, prior, model, measurements.values)
        estimates = PoseSet(model=test.model, poses=np.atleast_2d(result.x_hat))
        summaries[method.value] = pose_errors(estimates, reference)
        logger.info("%s: error de postura %.2f ± %.2f°", method.value,
                    summaries[method.value].pose_mean, summaries[method.value].pose_std)

    config = cfg.describe()
    config.update({
        "ridge": prior.ridge,
        "prior_sample_count": prior.sample_count,
        "test_count": test.count,
    })
    return build_report(config, summaries, [method.value for method in methods], compare=compare)


def run_reconstruction_experiment(train: PoseSet, test: PoseSet, cfg: SimulationConfig,
                                  methods: Sequence = DEFAULT_METHODS,
                                  ridge: Optional[float] = None) -> EvaluationReport:
    """
    Experimento completo: prior desde train, mediciones simuladas de test,
    estimación con cada método y comparación estadística
    """
    if train.model.names != test.model.names:
        raise DimensionMismatchError("Entrenamiento y prueba usan modelos de mano distintos")
    prior = build_prior(train, ridge)
    return evaluate_with_prior(prior, test, cfg, methods)


def synthetic_dataset(model: HandModel, seed: Optional[int] = None, train_size: int = DEFAULT_TRAIN_SIZE,
                      test_size: int = DEFAULT_TEST_SIZE, leading_variance: float = 600.0,
                      ratio: float = 0.6) -> Tuple[PoseSet, PoseSet]:
    """
    Conjuntos de entrenamiento y prueba muestreados de un prior de sinergias

    Los flujos de datos se derivan de [seed, DATASET_STREAM] para no compartir
    subflujos con el ruido de simulate_measurements.
    """
    seed = get_settings().seed if seed is None else seed
    truth = synergy_prior(model, leading_variance, ratio, seed=seed)
    train_stream, test_stream = np.random.SeedSequence([seed, DATASET_STREAM]).spawn(2)
    train = sample_poses(truth, model, train_size, np.random.Generator(np.random.PCG64(train_stream)),
                         source="synthetic-train")
    test = sample_poses(truth, model, test_size, np.random.Generator(np.random.PCG64(test_stream)),
                        source="synthetic-test")
    return train, test
