"""
Salida de terminal
Colores con colorama (solo en terminales), formato de logs y resumen de reportes
"""

import logging
import sys
from typing import Optional, TextIO

from colorama import Fore, Style

from posture.reporting import EvaluationReport, method_label

LEVEL_COLORS = {
    logging.DEBUG: Fore.CYAN,
    logging.INFO: Fore.WHITE,
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.RED,
}

LEVEL_ICONS = {
    logging.WARNING: "⚠️  ",
    logging.ERROR: "❌ ",
    logging.CRITICAL: "❌ ",
}


def _uses_color(stream: TextIO) -> bool:
    isatty = getattr(stream, "isatty", None)
    return bool(isatty and isatty())


def paint(text: str, color: str, stream: TextIO) -> str:
    """Colorea el texto solo si el destino es una terminal"""
    if not _uses_color(stream):
        return text
    return f"{color}{text}{Style.RESET_ALL}"


class ColorFormatter(logging.Formatter):
    """Formatter con ícono y color por nivel"""

    def __init__(self, use_color: bool = True):
        super().__init__("%(levelname)s %(name)s: %(message)s")
        self.use_color = use_color

    def format(self, record: logging.LogRecord) -> str:
        text = LEVEL_ICONS.get(record.levelno, "") + super().format(record)
        if self.use_color:
            return f"{LEVEL_COLORS.get(record.levelno, '')}{text}{Style.RESET_ALL}"
        return text


def setup_logging(verbosity: int = 0, stream: Optional[TextIO] = None) -> logging.Logger:
    """
    Configura el logger del paquete

    Args:
        verbosity: 0 → WARNING, 1 → INFO, 2 o más → DEBUG
        stream: Destino de los logs (stderr por defecto)
    """
    stream = stream or sys.stderr
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG

    logger = logging.getLogger("posture")
    for handler in list(logger.handlers):
        if getattr(handler, "_posture_console", False):
            logger.removeHandler(handler)

    handler = logging.StreamHandler(stream)
    handler.setFormatter(ColorFormatter(use_color=_uses_color(stream)))
    handler._posture_console = True
    logger.addHandler(handler)
    logger.setLevel(level)
    return logger


def print_success(message: str, stream: Optional[TextIO] = None):
    stream = stream or sys.stdout
    print(paint(f"✓ {message}", Fore.GREEN, stream), file=stream)


def print_error(error: Exception, stream: Optional[TextIO] = None, code: Optional[str] = None):
    """Error con su código en una línea y, si hay, la sugerencia en la siguiente"""
    stream = stream or sys.stderr
    code = code or getattr(error, "code", "ERROR")
    print(paint(f"❌ [{code}] {error}", Fore.RED, stream), file=stream)
    if getattr(error, "hint", None):
        print(paint(f"💡 {error.hint}", Fore.YELLOW, stream), file=stream)


def print_report(report: EvaluationReport, stream: Optional[TextIO] = None):
    """Resumen del reporte: error de postura por método y comparaciones de postura"""
    stream = stream or sys.stdout
    rule = paint("=" * 70, Fore.CYAN, stream)

    print(rule, file=stream)
    print(paint("📊 ERRORES DE RECONSTRUCCIÓN", Fore.GREEN, stream), file=stream)
    seed = report.config.get("seed")
    if seed is not None:
        print(f"Semilla: {seed} ({report.config.get('rng', '')})", file=stream)
    print(rule, file=stream)

    print(f"{'Método':<10} {'Postura (media ± desv)':<26} {'Máx':>8}", file=stream)
    for method in report.methods:
        summary = report.summaries[method]
        cell = f"{summary.pose_mean:.2f} ± {summary.pose_std:.2f}°"
        print(f"{method_label(method):<10} {cell:<26} {summary.pose_max:>7.2f}°", file=stream)

    comparisons = [row for row in report.comparisons if row.scope == "pose"]
    if comparisons:
        print("", file=stream)
    for row in comparisons:
        result = row.result
        pair = f"{method_label(row.method_a)} vs {method_label(row.method_b)}"
        if result.significant_at_5pct:
            verdict = paint("diferencia significativa", Fore.GREEN, stream)
        else:
            verdict = paint("sin diferencia significativa", Fore.YELLOW, stream)
        print(f"{pair}: p = {result.reported_p:.4f} ({result.test_kind.value}) → {verdict}", file=stream)
