#!/usr/bin/env python3
"""
Línea de comandos de posture
Subcomandos: build-prior, simulate, calibrate, estimate, evaluate
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
from colorama import just_fix_windows_console

from posture import console
from posture.calibration import CalibrationSet, average_windows, calibrate
from posture.config import get_settings
from posture.dataio import (
    load_measurement_model,
    load_prior,
    load_simulation_config,
    read_measurements_csv,
    read_pose_csv,
    read_raw_windows_csv,
    save_measurement_model,
    save_prior,
    write_pose_csv,
)
from posture.errors import DimensionMismatchError, FileFormatError, PostureError
from posture.estimators import Estimate, EstimatorMethod, MeasurementModel, estimate, posterior_covariance
from posture.hand_model import default_hand_model
from posture.prior import PoseSet, PriorModel, build_prior, synergies
from posture.reporting import EvaluationReport, build_report, render_report
from posture.simulator import (
    DEFAULT_METHODS,
    DEFAULT_NOISE_SIGMA_DEG,
    SimulationConfig,
    evaluate_with_prior,
    metacarpal_glove_config,
    synthetic_dataset,
)
from posture.stats import pose_errors

logger = logging.getLogger(__name__)

FORMATS = ("json", "markdown")
FORMAT_SUFFIX = {"json": ".json", "markdown": ".md"}


def _require_files(*paths: Optional[Path]):
    for path in paths:
        if path is not None and not Path(path).is_file():
            raise FileFormatError(path, "el archivo no existe")


def _report_base(out: Path) -> Path:
    return out.with_suffix("") if out.suffix in (".json", ".md") else out


def write_report(report: EvaluationReport, out: Optional[Path], formats: Iterable[str]) -> List[Path]:
    """Escribe el reporte en cada formato pedido; sin out lo imprime en stdout"""
    written = []
    for fmt in formats:
        document = render_report(report, fmt)
        if out is None:
            sys.stdout.write(document)
            continue
        path = _report_base(Path(out)).with_suffix(FORMAT_SUFFIX[fmt])
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(document, encoding="utf-8")
        written.append(path)
    return written


def cmd_build_prior(poses_csv: Path, out_prior: Path, ridge: Optional[float] = None) -> PriorModel:
    """CSV de posturas → bundle del prior (μ_o, P_o, N, ridge)"""
    _require_files(poses_csv)
    poses = read_pose_csv(poses_csv)
    prior = build_prior(poses, ridge)
    save_prior(prior, out_prior, poses.model)

    decomposition = synergies(prior)
    logger.info("%d sinergias explican el 90%% de la varianza", decomposition.components_for(0.9))
    return prior


def cmd_simulate(test_poses_csv: Optional[Path], sim_config: SimulationConfig,
                 prior_path: Optional[Path] = None, train_csv: Optional[Path] = None,
                 methods: Sequence = DEFAULT_METHODS, ridge: Optional[float] = None) -> EvaluationReport:
    """
    Experimento de reconstrucción con mediciones simuladas

    El prior viene de --prior o se construye desde --train. Sin posturas de
    prueba se genera un conjunto sintético 114/54 desde un prior de sinergias.
    """
    _require_files(test_poses_csv, prior_path, train_csv)

    if test_poses_csv is None:
        train, test = synthetic_dataset(default_hand_model(), sim_config.seed)
        prior = build_prior(train, ridge)
    else:
        if prior_path is not None:
            prior, model = load_prior(prior_path)
        else:
            train = read_pose_csv(train_csv)
            model = train.model
            prior = build_prior(train, ridge)
        test = read_pose_csv(test_poses_csv, model)

    if sim_config.measurement.n != prior.n:
        raise DimensionMismatchError(f"H tiene {sim_config.measurement.n} columnas y el prior {prior.n} DoFs")
    return evaluate_with_prior(prior, test, sim_config, methods)


def cmd_calibrate(reference_csv: Path, readings_csv: Optional[Path], out_model: Path,
                  raw_windows_csv: Optional[Path] = None, window: Optional[int] = None) -> MeasurementModel:
    """
    Posturas de referencia + lecturas del guante → Ĥ_g y R

    Sin CSV de lecturas, Y_g se arma promediando las últimas muestras de cada ventana.
    """
    _require_files(reference_csv, readings_csv, raw_windows_csv)
    reference = read_pose_csv(reference_csv)

    raw_windows, channels = None, None
    if raw_windows_csv is not None:
        raw_windows, channels = read_raw_windows_csv(raw_windows_csv)
    if readings_csv is not None:
        readings, channels = read_measurements_csv(readings_csv, channels)
    else:
        readings = average_windows(raw_windows, window).T

    cal = CalibrationSet(
        reference_poses=reference.poses.T,
        glove_readings=readings.T,
        raw_windows=raw_windows,
        dof_names=reference.model.names,
        channels=channels,
    )
    measurement = calibrate(cal, window)
    save_measurement_model(measurement, out_model, reference.model)
    return measurement


def cmd_estimate(prior_path: Path, model_path: Path, measurements_csv: Path, method, out_poses: Path,
                 with_uncertainty: bool = False) -> Estimate:
    """Una postura estimada por cada fila de mediciones"""
    _require_files(prior_path, model_path, measurements_csv)
    prior, hand = load_prior(prior_path)
    measurement, measured_hand = load_measurement_model(model_path)
    if measured_hand.names != hand.names:
        raise DimensionMismatchError("El prior y el modelo de medición usan DoFs distintos")

    values, _ = read_measurements_csv(measurements_csv, measurement.channels or None)
    if values.shape[1] != measurement.m:
        raise DimensionMismatchError(f"Las mediciones tienen {values.shape[1]} canales y H {measurement.m} filas")

    result = estimate(method, prior, measurement, values)
    write_pose_csv(PoseSet(model=hand, poses=np.atleast_2d(result.x_hat), source=str(measurements_csv)), out_poses)

    if with_uncertainty:
        covariance = result.posterior_cov
        if covariance is None:
            covariance = posterior_covariance(prior, measurement)
        std = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
        out_poses = Path(out_poses)
        write_pose_csv(PoseSet(model=hand, poses=std[None, :]),
                       out_poses.with_name(f"{out_poses.stem}_std.csv"))
    return result


def cmd_evaluate(estimates_csv: Path, reference_csv: Path,
                 baseline_estimates_csv: Optional[Path] = None) -> EvaluationReport:
    """Resumen de errores; con baseline agrega la comparación estadística"""
    _require_files(estimates_csv, reference_csv, baseline_estimates_csv)
    reference = read_pose_csv(reference_csv)
    summaries = {"estimate": pose_errors(read_pose_csv(estimates_csv, reference.model), reference)}
    if baseline_estimates_csv is not None:
        summaries["baseline"] = pose_errors(read_pose_csv(baseline_estimates_csv, reference.model), reference)

    config = {
        "estimates": str(estimates_csv),
        "reference": str(reference_csv),
        "baseline": str(baseline_estimates_csv) if baseline_estimates_csv else None,
        "pose_count": reference.count,
    }
    return build_report(config, summaries, list(summaries))


def _path(value: Optional[str]) -> Optional[Path]:
    return Path(value) if value else None


def _selected_formats(args) -> Sequence[str]:
    return [args.format] if args.format else FORMATS


def _run_build_prior(args) -> int:
    prior = cmd_build_prior(Path(args.poses), Path(args.out), args.ridge)
    console.print_success(f"Prior guardado en {args.out} (n={prior.n}, N={prior.sample_count}, ridge={prior.ridge:g})")
    return 0


def _run_simulate(args, parser) -> int:
    if args.config and args.paper_defaults:
        parser.error("--config y --paper-defaults son excluyentes")
    if not args.config and not args.paper_defaults:
        parser.error("se necesita --config o --paper-defaults")
    if args.prior and args.train:
        parser.error("--prior y --train son excluyentes")
    if args.test and not (args.prior or args.train):
        parser.error("con posturas de prueba se necesita --prior o --train")
    if not args.test and not args.paper_defaults:
        parser.error("sin posturas de prueba solo se admite --paper-defaults (datos sintéticos)")
    if not args.test and (args.prior or args.train):
        parser.error("--prior y --train requieren posturas de prueba")
    if args.prior and args.ridge is not None:
        parser.error("--ridge no aplica a un prior cargado con --prior")

    seed = args.seed if args.seed is not None else get_settings().seed
    if args.paper_defaults:
        sigma = args.sigma if args.sigma is not None else DEFAULT_NOISE_SIGMA_DEG
        sim_config = metacarpal_glove_config(sigma_deg=sigma, seed=seed)
    else:
        _require_files(Path(args.config))
        hand = load_prior(args.prior)[1] if args.prior else default_hand_model()
        sim_config = load_simulation_config(args.config, hand, seed=args.seed)
        if args.sigma is not None:
            sim_config = SimulationConfig(measurement=sim_config.measurement, noise_sigma_deg=args.sigma,
                                          seed=sim_config.seed, trials_per_pose=sim_config.trials_per_pose)

    report = cmd_simulate(_path(args.test), sim_config, prior_path=_path(args.prior), train_csv=_path(args.train),
                          methods=args.method or DEFAULT_METHODS, ridge=args.ridge)
    formats = _selected_formats(args) if args.out else [args.format or "markdown"]
    written = write_report(report, _path(args.out), formats)
    if written:
        console.print_report(report)
        for path in written:
            console.print_success(f"Reporte escrito en {path}")
    return 0


def _run_calibrate(args, parser) -> int:
    if not args.readings and not args.raw_windows:
        parser.error("se necesitan lecturas o --raw-windows")
    measurement = cmd_calibrate(Path(args.reference), _path(args.readings), Path(args.out),
                                raw_windows_csv=_path(args.raw_windows), window=args.window)
    noise = "con R estimada" if measurement.has_noise else "sin R (ruido nulo)"
    console.print_success(f"Modelo de medición {measurement.m}×{measurement.n} guardado en {args.out} ({noise})")
    return 0


def _run_estimate(args, parser) -> int:
    if args.with_uncertainty and args.method == EstimatorMethod.PINV.value:
        parser.error("--with-uncertainty no aplica a pinv")
    result = cmd_estimate(Path(args.prior), Path(args.model), Path(args.measurements), args.method,
                          Path(args.out), with_uncertainty=args.with_uncertainty)
    rows = np.atleast_2d(result.x_hat).shape[0]
    console.print_success(f"{rows} posturas estimadas con {args.method} en {args.out}")
    return 0


def _run_evaluate(args) -> int:
    report = cmd_evaluate(Path(args.estimates), Path(args.reference), _path(args.baseline))
    formats = _selected_formats(args) if args.out else [args.format or "markdown"]
    written = write_report(report, _path(args.out), formats)
    if written:
        console.print_report(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posture",
        description="Reconstrucción de posturas de la mano a partir de mediciones de guante",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Ejemplos de uso:
  python -m posture build-prior train.csv --out prior.json
  python -m posture simulate --paper-defaults --out report            # datos sintéticos 114/54
  python -m posture simulate test.csv --prior prior.json --config sim.json --out report
  python -m posture calibrate reference.csv readings.csv --raw-windows raw.csv --out glove.json
  python -m posture estimate y.csv --prior prior.json --model glove.json --method mve --out poses.csv
  python -m posture evaluate poses.csv test.csv --baseline pinv.csv --format markdown
        """
    )
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='Más detalle en los logs (-v info, -vv debug)')
    subparsers = parser.add_subparsers(dest='command', required=True)

    build = subparsers.add_parser('build-prior', help='Construye el prior (μ_o, P_o) desde un CSV de posturas')
    build.add_argument('poses', help='CSV de posturas (cabecera con nombres de DoF)')
    build.add_argument('--out', required=True, help='JSON del prior (la covarianza va en <out>_cov.csv)')
    build.add_argument('--ridge', type=float, default=None, help='Valor sumado a la diagonal de P_o')

    simulate = subparsers.add_parser('simulate', help='Simula un guante y compara estimadores')
    simulate.add_argument('test', nargs='?', help='CSV de posturas de prueba (opcional con --paper-defaults)')
    simulate.add_argument('--prior', help='JSON del prior')
    simulate.add_argument('--train', help='CSV de posturas para construir el prior')
    simulate.add_argument('--config', help='JSON de configuración de la simulación')
    simulate.add_argument('--paper-defaults', action='store_true',
                          help='Mide {TM, IM, MM, RM, LM} con σ=7° (y datos sintéticos 114/54 si no hay CSV)')
    simulate.add_argument('--sigma', type=float, default=None, help='Desvío del ruido en grados')
    simulate.add_argument('--method', action='append', choices=[m.value for m in EstimatorMethod],
                          help='Estimador a evaluar (repetible; por defecto pinv y mve)')
    simulate.add_argument('--seed', type=int, default=None, help='Semilla del experimento')
    simulate.add_argument('--ridge', type=float, default=None,
                          help='Ridge del prior construido desde --train o desde el conjunto sintético')
    simulate.add_argument('--out', help='Ruta base del reporte (.json y .md); sin --out se imprime')
    simulate.add_argument('--format', choices=FORMATS, help='Formato (default: ambos con --out, markdown sin --out)')

    cal = subparsers.add_parser('calibrate', help='Estima Ĥ_g y R del guante')
    cal.add_argument('reference', help='CSV de posturas de referencia')
    cal.add_argument('readings', nargs='?', help='CSV de lecturas del guante (una fila por postura)')
    cal.add_argument('--raw-windows', help='CSV largo window_id,channel,value con las muestras crudas')
    cal.add_argument('--window', type=int, default=None, help='Muestras finales a promediar (default 50)')
    cal.add_argument('--out', required=True, help='JSON del modelo de medición')

    est = subparsers.add_parser('estimate', help='Estima posturas a partir de mediciones')
    est.add_argument('measurements', help='CSV de mediciones (cabecera con canales)')
    est.add_argument('--prior', required=True, help='JSON del prior')
    est.add_argument('--model', required=True, help='JSON del modelo de medición')
    est.add_argument('--method', default=EstimatorMethod.MVE_SMW.value, choices=[m.value for m in EstimatorMethod],
                     help='Estimador (default: mve)')
    est.add_argument('--with-uncertainty', action='store_true',
                     help='Escribe también <out>_std.csv con el desvío a posteriori de cada DoF')
    est.add_argument('--out', required=True, help='CSV de posturas estimadas')

    ev = subparsers.add_parser('evaluate', help='Errores de estimación y comparación contra un baseline')
    ev.add_argument('estimates', help='CSV de posturas estimadas')
    ev.add_argument('reference', help='CSV de posturas de referencia')
    ev.add_argument('--baseline', help='CSV de estimaciones de otro método')
    ev.add_argument('--out', help='Ruta base del reporte; sin --out se imprime')
    ev.add_argument('--format', choices=FORMATS, help='Formato (default: ambos con --out, markdown sin --out)')

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Punto de entrada

    Returns:
        0 si todo salió bien, 1 ante un error de datos o de cálculo, 2 ante un error de uso
    """
    just_fix_windows_console()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)

    console.setup_logging(args.verbose)
    try:
        if args.command == 'build-prior':
            return _run_build_prior(args)
        if args.command == 'simulate':
            return _run_simulate(args, parser)
        if args.command == 'calibrate':
            return _run_calibrate(args, parser)
        if args.command == 'estimate':
            return _run_estimate(args, parser)
        return _run_evaluate(args)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    except PostureError as e:
        console.print_error(e)
        return 1
    except ValueError as e:
        console.print_error(e, code="INVALID_VALUE")
        return 1
    except OSError as e:
        console.print_error(e, code="IO")
        return 1


if __name__ == "__main__":
    sys.exit(main())
