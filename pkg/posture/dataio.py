"""
Lectura y escritura de archivos
CSV de posturas, mediciones y matrices; bundles JSON+CSV del prior y del
modelo de medición; configuración de simulación en JSON
"""

import csv
import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from posture.errors import DimensionMismatchError, FileFormatError
from posture.estimators import MeasurementModel
from posture.hand_model import HandModel, default_hand_model
from posture.prior import PoseSet, PriorModel
from posture.simulator import SimulationConfig

logger = logging.getLogger(__name__)


def _format_float(value: float) -> str:
    return repr(float(value))


def _read_rows(path: Path) -> List[Tuple[int, List[str]]]:
    """Filas no vacías del CSV con su número de línea (1-based)"""
    path = Path(path)
    if not path.is_file():
        raise FileFormatError(path, "el archivo no existe")
    rows = []
    with path.open(newline="", encoding="utf-8-sig") as handle:
        for line, row in enumerate(csv.reader(handle), start=1):
            cells = [cell.strip() for cell in row]
            if not any(cells):
                continue
            rows.append((line, cells))
    if not rows:
        raise FileFormatError(path, "el archivo está vacío")
    return rows


def _parse_numeric(path: Path, rows: List[Tuple[int, List[str]]], width: int) -> np.ndarray:
    values = np.empty((len(rows), width))
    for k, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise FileFormatError(path, f"se esperaban {width} columnas, hay {len(cells)}", line)
        try:
            values[k] = [float(cell) for cell in cells]
        except ValueError:
            raise FileFormatError(path, f"valor no numérico en {cells}", line)
        if not np.all(np.isfinite(values[k])):
            raise FileFormatError(path, "valor no finito", line)
    return values


def _bind_header(path: Path, header: Sequence[str], names: Sequence[str], line: int) -> List[int]:
    """Posición de cada nombre esperado dentro de la cabecera"""
    if len(set(header)) != len(header):
        raise FileFormatError(path, f"cabecera con columnas repetidas: {list(header)}", line)
    unknown = [name for name in header if name not in names]
    if unknown:
        raise FileFormatError(path, f"columnas desconocidas: {unknown}", line)
    missing = [name for name in names if name not in header]
    if missing:
        raise FileFormatError(path, f"faltan columnas: {missing}", line)
    return [list(header).index(name) for name in names]


def _read_named_table(path, names: Optional[Sequence[str]]) -> Tuple[np.ndarray, Tuple[str, ...]]:
    path = Path(path)
    rows = _read_rows(path)
    header_line, header = rows[0]
    body = rows[1:]
    data = _parse_numeric(path, body, len(header)) if body else np.empty((0, len(header)))
    if names is None:
        return data, tuple(header)
    order = _bind_header(path, header, names, header_line)
    return data[:, order], tuple(names)


def _write_named_table(path, names: Sequence[str], values: np.ndarray):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(list(names))
        for row in np.atleast_2d(values):
            writer.writerow([_format_float(v) for v in row])


def read_pose_csv(path, model: Optional[HandModel] = None) -> PoseSet:
    """
    Lee un CSV de posturas (una fila por postura, cabecera con nombres de DoF)

    Las columnas se asocian por nombre, así que la cabecera puede venir en
    cualquier orden; la postura resultante sigue el orden del modelo.
    """
    model = model or default_hand_model()
    data, _ = _read_named_table(path, model.names)
    if data.shape[0] == 0:
        raise FileFormatError(path, "no hay filas de posturas")
    logger.debug("Leídas %d posturas de %s", data.shape[0], path)
    return PoseSet(model=model, poses=data, source=str(path))


def write_pose_csv(poses: PoseSet, path):
    _write_named_table(path, poses.model.names, poses.poses)


def read_measurements_csv(path, channels: Optional[Sequence[str]] = None) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """
    Lee mediciones o lecturas del guante (una fila por medición, cabecera de canales)

    Returns:
        (valores k × m, nombres de canal en el orden devuelto)
    """
    return _read_named_table(path, list(channels) if channels else None)


def read_matrix_csv(path) -> np.ndarray:
    """Matriz numérica sin cabecera"""
    path = Path(path)
    rows = _read_rows(path)
    return _parse_numeric(path, rows, len(rows[0][1]))


def write_matrix_csv(path, matrix: np.ndarray):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for row in np.atleast_2d(matrix):
            writer.writerow([_format_float(v) for v in row])


def read_raw_windows_csv(path, channels: Optional[Sequence[str]] = None) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """
    Lee muestras crudas en formato largo: window_id, channel, value

    window_id es el índice (0-based) de la postura de calibración; las muestras
    de cada ventana se toman en el orden del archivo. Sin channels, los canales
    se ordenan según su primera aparición.

    Returns:
        (arreglo m × N × W, nombres de canal)
    """
    path = Path(path)
    rows = _read_rows(path)
    header_line, header = rows[0]
    if header != ["window_id", "channel", "value"]:
        raise FileFormatError(path, "la cabecera debe ser window_id,channel,value", header_line)

    samples = {}
    for line, cells in rows[1:]:
        if len(cells) != 3:
            raise FileFormatError(path, f"se esperaban 3 columnas, hay {len(cells)}", line)
        window, channel, raw = cells
        if channels is not None and channel not in channels:
            raise FileFormatError(path, f"canal desconocido {channel!r}", line)
        try:
            key = (int(window), channel)
            value = float(raw)
        except ValueError:
            raise FileFormatError(path, f"fila inválida {cells}", line)
        if key[0] < 0 or not np.isfinite(value):
            raise FileFormatError(path, f"fila inválida {cells}", line)
        samples.setdefault(key, []).append(value)

    if not samples:
        raise FileFormatError(path, "no hay muestras")
    if channels is None:
        channels = list(dict.fromkeys(channel for _, channel in samples))
    channels = list(channels)
    count = max(window for window, _ in samples) + 1
    widths = {len(values) for values in samples.values()}
    if len(samples) != count * len(channels) or len(widths) != 1:
        raise FileFormatError(path, "cada ventana debe tener el mismo número de muestras en todos los canales")

    windows = np.empty((len(channels), count, widths.pop()))
    for (window, channel), values in samples.items():
        windows[channels.index(channel), window] = values
    return windows, tuple(channels)


def _load_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileFormatError(path, "el archivo no existe")
    try:
        with path.open(encoding="utf-8-sig") as handle:
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise FileFormatError(path, f"JSON inválido: {e.msg}", e.lineno)


def _dump_json(path, data: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(data, handle, indent=2, ensure_ascii=False)
        handle.write("\n")


def _companion(path: Path, suffix: str) -> Path:
    return path.with_name(f"{path.stem}_{suffix}.csv")


def save_prior(prior: PriorModel, path, model: HandModel) -> Path:
    """
    Guarda el prior como bundle: JSON (μ_o, N, ridge, DoFs) + CSV con P_o

    Returns:
        Ruta del CSV de covarianza escrito junto al JSON
    """
    path = Path(path)
    cov_path = _companion(path, "cov")
    write_matrix_csv(cov_path, prior.cov)
    _dump_json(path, {
        "dof_names": list(model.names),
        "mu": prior.mu.tolist(),
        "N": prior.sample_count,
        "ridge": prior.ridge,
        "cov_csv": cov_path.name,
    })
    return cov_path


def load_prior(path) -> Tuple[PriorModel, HandModel]:
    path = Path(path)
    data = _load_json(path)
    try:
        model = HandModel.from_names(data["dof_names"])
        cov = read_matrix_csv(path.parent / data["cov_csv"])
        prior = PriorModel(mu=data["mu"], cov=cov, sample_count=int(data["N"]), ridge=float(data["ridge"]))
    except KeyError as e:
        raise FileFormatError(path, f"falta el campo {e}")
    except (TypeError, ValueError) as e:
        raise FileFormatError(path, str(e))
    if prior.n != model.n:
        raise DimensionMismatchError(f"El prior tiene {prior.n} DoFs pero {model.n} nombres")
    return prior, model


def save_measurement_model(measurement: MeasurementModel, path, model: HandModel):
    """Bundle del modelo de medición: JSON + CSV de H y de R"""
    path = Path(path)
    h_path = _companion(path, "H")
    r_path = _companion(path, "R")
    write_matrix_csv(h_path, measurement.H)
    write_matrix_csv(r_path, measurement.R)
    _dump_json(path, {
        "dof_names": list(model.names),
        "channels": list(measurement.channels),
        "is_selection": measurement.is_selection,
        "H_csv": h_path.name,
        "R_csv": r_path.name,
    })


def load_measurement_model(path) -> Tuple[MeasurementModel, HandModel]:
    path = Path(path)
    data = _load_json(path)
    try:
        model = HandModel.from_names(data["dof_names"])
        H = read_matrix_csv(path.parent / data["H_csv"])
        R = read_matrix_csv(path.parent / data["R_csv"]) if data.get("R_csv") else None
        measurement = MeasurementModel(H=H, R=R, channels=tuple(data.get("channels", ())))
    except KeyError as e:
        raise FileFormatError(path, f"falta el campo {e}")
    if measurement.n != model.n:
        raise DimensionMismatchError(f"H tiene {measurement.n} columnas pero hay {model.n} DoFs")
    return measurement, model


def simulation_config_from_dict(data: dict, model: HandModel, base_dir: Path = Path("."),
                                seed: Optional[int] = None, source=None) -> SimulationConfig:
    """
    Configuración de simulación a partir de su documento JSON

    {"measured_dofs": [...] o "H_csv": ruta, "sigma_deg": número/lista o "R_csv": ruta,
     "seed": entero, "trials": entero}
    """
    source = source or base_dir
    if ("measured_dofs" in data) == ("H_csv" in data):
        raise FileFormatError(source, "la configuración necesita exactamente uno de measured_dofs o H_csv")
    if "sigma_deg" in data and "R_csv" in data:
        raise FileFormatError(source, "sigma_deg y R_csv son excluyentes")

    noise_cov = read_matrix_csv(base_dir / data["R_csv"]) if "R_csv" in data else None
    if "measured_dofs" in data:
        measurement = MeasurementModel.from_selection(model, data["measured_dofs"])
    else:
        measurement = MeasurementModel(H=read_matrix_csv(base_dir / data["H_csv"]))
        if measurement.n != model.n:
            raise DimensionMismatchError(f"H tiene {measurement.n} columnas pero hay {model.n} DoFs")

    return SimulationConfig(
        measurement=measurement,
        noise_sigma_deg=data.get("sigma_deg", 0.0),
        noise_cov=noise_cov,
        seed=int(data["seed"]) if seed is None and "seed" in data else seed,
        trials_per_pose=int(data.get("trials", 1)),
    )


def load_simulation_config(path, model: HandModel, seed: Optional[int] = None) -> SimulationConfig:
    """Lee la configuración JSON; las rutas de CSV son relativas al propio JSON"""
    path = Path(path)
    return simulation_config_from_dict(_load_json(path), model, path.parent, seed, source=path)
