#!/usr/bin/env python3
"""
Muestra en la terminal el resumen de un reporte JSON de evaluación
"""

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from colorama import Fore, just_fix_windows_console

from posture.console import print_report
from posture.errors import PostureError
from posture.reporting import parse_report, render_report


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(description='Visor de reportes de reconstrucción')
    parser.add_argument('report', help='JSON generado por simulate o evaluate')
    parser.add_argument('--markdown', action='store_true', help='Imprime las tablas completas en markdown')
    args = parser.parse_args(argv)

    just_fix_windows_console()
    path = Path(args.report)
    if not path.is_file():
        print(f"{Fore.RED}❌ No se encontró {path}", file=sys.stderr)
        return 1

    try:
        report = parse_report(path.read_text(encoding="utf-8"))
    except (PostureError, ValueError) as e:
        print(f"{Fore.RED}❌ Reporte inválido: {e}", file=sys.stderr)
        return 1

    if args.markdown:
        sys.stdout.write(render_report(report, "markdown"))
    else:
        print_report(report)
    return 0


if __name__ == "__main__":
    sys.exit(main())
