"""
Configuración del paquete
Lee variables de entorno (y el archivo .env si existe)
"""

import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv

from posture.errors import ConfigError

DEFAULT_RIDGE = 1e-9
DEFAULT_CONDITION_LIMIT = 1e12
DEFAULT_SEED = 20130
DEFAULT_LILLIEFORS_REPLICATES = 10_000
DEFAULT_LILLIEFORS_SEED = 1848
DEFAULT_WINDOW = 50


@dataclass(frozen=True)
class Settings:
    """Parámetros numéricos y rutas configurables"""
    ridge: float
    condition_limit: float
    seed: int
    lilliefors_replicates: int
    lilliefors_seed: int
    cache_dir: Path
    window: int


def _read(name: str, cast, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"Valor inválido para {name}: {raw!r}")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """
    Carga la configuración una sola vez por proceso

    Returns:
        Settings con los valores de entorno o los valores por defecto
    """
    load_dotenv()

    settings = Settings(
        ridge=_read("POSTURE_RIDGE", float, DEFAULT_RIDGE),
        condition_limit=_read("POSTURE_CONDITION_LIMIT", float, DEFAULT_CONDITION_LIMIT),
        seed=_read("POSTURE_SEED", int, DEFAULT_SEED),
        lilliefors_replicates=_read("POSTURE_LILLIEFORS_REPLICATES", int, DEFAULT_LILLIEFORS_REPLICATES),
        lilliefors_seed=_read("POSTURE_LILLIEFORS_SEED", int, DEFAULT_LILLIEFORS_SEED),
        cache_dir=Path(_read("POSTURE_CACHE_DIR", str, str(Path.home() / ".cache" / "posture"))).expanduser(),
        window=_read("POSTURE_WINDOW", int, DEFAULT_WINDOW),
    )

    if settings.ridge < 0:
        raise ConfigError("POSTURE_RIDGE debe ser >= 0")
    if settings.condition_limit <= 1:
        raise ConfigError("POSTURE_CONDITION_LIMIT debe ser > 1")
    if settings.lilliefors_replicates < 1000:
        raise ConfigError("POSTURE_LILLIEFORS_REPLICATES debe ser >= 1000")
    if settings.window < 2:
        raise ConfigError("POSTURE_WINDOW debe ser >= 2")

    return settings
