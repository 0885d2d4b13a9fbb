"""
Módulo de reportes de multicarga
Escribe los RunReport como JSON y los pasos como CSV, de forma atómica y
byte a byte reproducible para la misma configuración y semilla.
"""

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np

from .constants import CSV_DIGITS

logger = logging.getLogger(__name__)

FORMATS = ('csv', 'json')


@dataclass
class RunReport:
    """Resultado de un experimento: entradas resueltas, pasos, totales y comprobaciones."""
    kind: str
    inputs: dict
    columns: list = field(default_factory=list)   # [(nombre, unidad), ...]
    steps: list = field(default_factory=list)
    totals: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    ok: bool = True
    exit_code: int = 0

    @property
    def header(self) -> list:
        return [f"{name} [{unit}]" for name, unit in self.columns]

    def as_dict(self) -> dict:
        return {
            'kind': self.kind,
            'inputs': self.inputs,
            'columns': self.header,
            'steps': self.steps,
            'totals': self.totals,
            'checks': self.checks,
            'ok': self.ok,
        }


def to_jsonable(value):
    """Convierte racionales, complejos y tipos numpy en valores JSON deterministas."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (Fraction, Decimal)):
        return str(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(value.real), to_jsonable(value.imag)]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        return 'nan' if math.isnan(value) else ('inf' if value > 0 else '-inf')
    if isinstance(value, Path):
        return value.as_posix()
    return value


def format_number(value) -> str:
    """17 dígitos significativos con '.' como separador; enteros y racionales exactos."""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (float, np.floating, Decimal)):
        return format(float(value), f'.{CSV_DIGITS}g')
    return str(value)


class ReportWriter:
    """Escritor de reportes con escritura atómica en el directorio de salida."""

    def __init__(self, config=None):
        self.config = None
        self.output_dir = None
        if config:
            self.init_app(config)

    def init_app(self, config):
        """Toma el directorio de salida de la configuración."""
        self.config = config
        self.output_dir = Path(getattr(config, 'OUTPUT_DIR', 'resultados'))
        logger.debug("📦 Reportes en %s", self.output_dir)

    def _target(self, name: str, out_dir=None) -> Path:
        base = Path(out_dir) if out_dir is not None else (self.output_dir or Path('resultados'))
        base.mkdir(parents=True, exist_ok=True)
        return base / name

    def _atomic_write(self, path: Path, text: str) -> Path:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
        try:
            with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as handle:
                handle.write(text)
            os.replace(tmp, path)
        except Exception:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise
        return path

    def write_json(self, name: str, payload: dict, out_dir=None) -> Path:
        text = json.dumps(to_jsonable(payload), sort_keys=True, indent=2, ensure_ascii=False) + '\n'
        path = self._atomic_write(self._target(name, out_dir), text)
        logger.info("📦 Reporte JSON escrito: %s", path)
        return path

    def write_csv(self, name: str, header: list, rows: list, out_dir=None) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
        path = self._atomic_write(self._target(name, out_dir), buffer.getvalue())
        logger.info("📦 CSV escrito: %s (%d filas)", path, len(rows))
        return path

    def write_report(self, report: RunReport, fmt: str = 'json', out_dir=None) -> list:
        """JSON con el reporte completo; con fmt='csv' además los pasos por fila."""
        if fmt not in FORMATS:
            raise ValueError(f"Formato desconocido {fmt!r}")
        stem = report.kind.replace('-', '_')
        paths = [self.write_json(f'{stem}.json', report.as_dict(), out_dir)]
        if fmt == 'csv':
            paths.append(self.write_csv(f'{stem}_steps.csv', report.header, report.steps, out_dir))
        return paths


# Instancia global
report_writer = ReportWriter()
