import logging
import os

import numpy as np
import pytest

from posture.config import get_settings
from posture.hand_model import HandModel, default_hand_model
from posture.prior import PriorModel
from posture.stats import lilliefors_null_table


@pytest.fixture(autouse=True, scope="session")
def cache_dir(tmp_path_factory):
    """Las tablas de Lilliefors de la sesión van a un directorio temporal"""
    directory = tmp_path_factory.mktemp("posture-cache")
    previous = os.environ.get("POSTURE_CACHE_DIR")
    os.environ["POSTURE_CACHE_DIR"] = str(directory)
    get_settings.cache_clear()
    lilliefors_null_table.cache_clear()
    yield directory
    if previous is None:
        os.environ.pop("POSTURE_CACHE_DIR", None)
    else:
        os.environ["POSTURE_CACHE_DIR"] = previous
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    logger = logging.getLogger("posture")
    for handler in list(logger.handlers):
        if getattr(handler, "_posture_console", False):
            logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)


@pytest.fixture
def hand() -> HandModel:
    return default_hand_model()


@pytest.fixture
def two_dof() -> HandModel:
    return HandModel.from_names(["A", "B"])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def toy_prior() -> PriorModel:
    """P_o = [[2, 1], [1, 2]], μ_o = 0"""
    return PriorModel(mu=[0.0, 0.0], cov=[[2.0, 1.0], [1.0, 2.0]], sample_count=0)


def _random_prior(rng: np.random.Generator, n: int = 15) -> PriorModel:
    factor = rng.standard_normal((n, n))
    cov = factor @ factor.T + n * np.eye(n)
    return PriorModel(mu=rng.normal(30.0, 15.0, n), cov=0.5 * (cov + cov.T), sample_count=0)


@pytest.fixture
def random_prior():
    """Fábrica de priors SPD bien condicionados"""
    return _random_prior
