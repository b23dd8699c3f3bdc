"""
Reportes de evaluación
Arma los resúmenes de error y las comparaciones entre métodos, y los
exporta como JSON (estable, sin pérdida) o como tablas markdown
"""

import json
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from posture.errors import IncompleteReportError, TooFewSamplesError
from posture.stats import ErrorSummary, TestKind, TestResult, select_and_compare

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MIN_COMPARISON_SIZE = 4

METHOD_LABELS = {
    "pinv": "Pinv",
    "map": "MAP",
    "nullspace": "MAP-N",
    "lagrangian": "MAP-L",
    "conditional": "Cond",
    "information": "MVE-I",
    "mve": "MVE",
}

TEST_MARKS = {TestKind.TEQ: "⋄", TestKind.TNEQ: "‡", TestKind.U: ""}


def method_label(method: str) -> str:
    return METHOD_LABELS.get(method, method)


@dataclass(frozen=True)
class ComparisonRow:
    """Comparación entre dos métodos, a nivel de postura (dof=None) o de un DoF"""
    scope: str
    method_a: str
    method_b: str
    result: TestResult
    dof: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "scope": self.scope,
            "dof": self.dof,
            "method_a": self.method_a,
            "method_b": self.method_b,
            "result": self.result.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ComparisonRow":
        return cls(scope=data["scope"], dof=data["dof"], method_a=data["method_a"],
                   method_b=data["method_b"], result=TestResult.from_dict(data["result"]))


@dataclass(frozen=True)
class EvaluationReport:
    """
    Resultado de una evaluación

    config guarda el eco de la configuración (semilla, H, ruido, RNG);
    summaries tiene un ErrorSummary por método, en el orden de methods.
    """
    config: dict
    dof_names: Tuple[str, ...]
    methods: Tuple[str, ...]
    summaries: Mapping[str, ErrorSummary]
    comparisons: Tuple[ComparisonRow, ...] = field(default=())

    def validate(self):
        if not self.methods:
            raise IncompleteReportError("El reporte no tiene métodos")
        missing = [method for method in self.methods if method not in self.summaries]
        if missing:
            raise IncompleteReportError(f"Faltan resúmenes para {missing}")

    def comparisons_for(self, method_a: str, method_b: str) -> List[ComparisonRow]:
        return [row for row in self.comparisons if (row.method_a, row.method_b) == (method_a, method_b)]

    def pose_comparison(self, method_a: str, method_b: str) -> Optional[ComparisonRow]:
        for row in self.comparisons_for(method_a, method_b):
            if row.scope == "pose":
                return row
        return None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "dof_names": list(self.dof_names),
            "methods": list(self.methods),
            "summaries": {method: self.summaries[method].to_dict() for method in self.methods},
            "comparisons": [row.to_dict() for row in self.comparisons],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluationReport":
        try:
            methods = tuple(data["methods"])
            return cls(
                config=data["config"],
                dof_names=tuple(data["dof_names"]),
                methods=methods,
                summaries={method: ErrorSummary.from_dict(data["summaries"][method]) for method in methods},
                comparisons=tuple(ComparisonRow.from_dict(row) for row in data["comparisons"]),
            )
        except KeyError as e:
            raise IncompleteReportError(f"Falta el campo {e} en el reporte")


def _compare(a, b) -> Optional[TestResult]:
    try:
        return select_and_compare(a, b)
    except TooFewSamplesError as e:
        logger.warning("Comparación omitida: %s", e)
        return None


def build_report(config: dict, summaries: Mapping[str, ErrorSummary], methods: Sequence[str],
                 compare: bool = True) -> EvaluationReport:
    """
    Arma el reporte y, si compare es True, compara cada par de métodos

    Cada par se compara a nivel de postura y DoF por DoF con select_and_compare
    (muestras independientes).
    """
    methods = tuple(methods)
    if not methods:
        raise IncompleteReportError("No se pidió ningún método")
    dof_names = summaries[methods[0]].dof_names

    rows: List[ComparisonRow] = []
    if compare and summaries[methods[0]].per_pose_errors.size < MIN_COMPARISON_SIZE:
        logger.warning("Comparaciones omitidas: se necesitan al menos %d posturas", MIN_COMPARISON_SIZE)
        compare = False
    if compare:
        for method_a, method_b in combinations(methods, 2):
            first, second = summaries[method_a], summaries[method_b]
            for index, dof in enumerate(dof_names):
                result = _compare(first.per_dof_errors[index], second.per_dof_errors[index])
                if result is not None:
                    rows.append(ComparisonRow("dof", method_a, method_b, result, dof))
            result = _compare(first.per_pose_errors, second.per_pose_errors)
            if result is not None:
                rows.append(ComparisonRow("pose", method_a, method_b, result))

    report = EvaluationReport(config=dict(config), dof_names=tuple(dof_names), methods=methods,
                              summaries=dict(summaries), comparisons=tuple(rows))
    report.validate()
    return report


def _mean_std(mean: float, std: float) -> str:
    return f"{mean:.2f} ± {std:.2f}"


def _p_cell(row: Optional[ComparisonRow]) -> Tuple[str, bool]:
    if row is None:
        return "n/a", False
    mark = TEST_MARKS.get(row.result.test_kind, "")
    text = f"{row.result.reported_p:.4f}"
    return (f"{text} {mark}" if mark else text), not row.result.significant_at_5pct


def _table_line(cells: Sequence[str], bold: bool = False) -> str:
    if bold:
        cells = [f"**{cell}**" for cell in cells]
    return "| " + " | ".join(cells) + " |"


def _summary_table(report: EvaluationReport, method: str) -> List[str]:
    summary = report.summaries[method]
    label = method_label(method)
    lines = [
        _table_line(["DoF", f"{label} media ± desv", f"{label} máx"]),
        _table_line(["---"] * 3),
    ]
    for index, dof in enumerate(report.dof_names):
        lines.append(_table_line([dof, _mean_std(summary.dof_mean[index], summary.dof_std[index]),
                                  f"{summary.dof_max[index]:.2f}"]))
    lines.append(_table_line(["Pose", _mean_std(summary.pose_mean, summary.pose_std), f"{summary.pose_max:.2f}"]))
    return lines


def _pair_table(report: EvaluationReport, method_a: str, method_b: str) -> List[str]:
    first, second = report.summaries[method_a], report.summaries[method_b]
    label_a, label_b = method_label(method_a), method_label(method_b)
    by_dof = {row.dof: row for row in report.comparisons_for(method_a, method_b) if row.scope == "dof"}

    lines = [
        _table_line(["DoF", f"{label_a} media ± desv", f"{label_a} máx",
                     f"{label_b} media ± desv", f"{label_b} máx", "p"]),
        _table_line(["---"] * 6),
    ]
    for index, dof in enumerate(report.dof_names):
        p_text, bold = _p_cell(by_dof.get(dof))
        lines.append(_table_line([
            dof,
            _mean_std(first.dof_mean[index], first.dof_std[index]), f"{first.dof_max[index]:.2f}",
            _mean_std(second.dof_mean[index], second.dof_std[index]), f"{second.dof_max[index]:.2f}",
            p_text,
        ], bold))

    p_text, bold = _p_cell(report.pose_comparison(method_a, method_b))
    lines.append(_table_line([
        "Pose",
        _mean_std(first.pose_mean, first.pose_std), f"{first.pose_max:.2f}",
        _mean_std(second.pose_mean, second.pose_std), f"{second.pose_max:.2f}",
        p_text,
    ], bold))
    return lines


def _config_lines(config: dict) -> List[str]:
    lines = []
    for key in sorted(config):
        value = config[key]
        text = value if isinstance(value, str) else json.dumps(value, ensure_ascii=False)
        lines.append(f"- {key}: {text}")
    return lines


def render_markdown(report: EvaluationReport) -> str:
    report.validate()
    lines = ["# Errores de reconstrucción de postura", ""]
    lines += _config_lines(report.config)

    if len(report.methods) == 1:
        lines += ["", f"## {method_label(report.methods[0])}", ""]
        lines += _summary_table(report, report.methods[0])
    for method_a, method_b in combinations(report.methods, 2):
        lines += ["", f"## {method_label(method_a)} vs {method_label(method_b)}", ""]
        lines += _pair_table(report, method_a, method_b)

    lines += [
        "",
        "Errores en grados. p con 4 decimales (p < 1e-4 se reporta como 0). "
        "⋄ t con varianzas iguales, ‡ t de Welch, sin marca U de Mann-Whitney. "
        "En negrita: sin diferencia significativa al 5%.",
        "",
    ]
    return "\n".join(lines)


def render_json(report: EvaluationReport) -> str:
    report.validate()
    return json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"


def render_report(report: EvaluationReport, format: str = "json") -> str:
    """
    Documento del reporte en el formato pedido

    Args:
        report: Reporte completo
        format: 'json' o 'markdown'
    """
    if format == "json":
        return render_json(report)
    if format == "markdown":
        return render_markdown(report)
    raise ValueError(f"Formato desconocido: {format}")


def parse_report(text: str) -> EvaluationReport:
    """Reconstruye un reporte desde su JSON"""
    return EvaluationReport.from_dict(json.loads(text))
