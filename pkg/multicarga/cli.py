# cli.py - Interfaz de línea de comandos de multicarga
"""
Subcomandos: run, thermal, solve-betas, trade, extract, battery, audit, sweep
y el grupo farey (sequence, bezout, robust-select, coverage).

Códigos de salida: 0 éxito, 2 violación de invariante o comprobación fallida,
3 reespecificación necesaria (RespecifyRequired / ExcludedRatio), 4 error de
configuración (sin escribir ningún archivo).
"""

import logging
import time

import click
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from . import __version__
from .config import Config
from .errors import ConfigError, MulticargaError
from .experiment import load_config
from .numtheory import (
    RespecifyRequired,
    bezout,
    farey_sequence,
    parse_rational,
    robust_select,
    verify_coverage,
)
from .reports import FORMATS, format_number, report_writer
from .runners import run_experiment, run_sweep

logger = logging.getLogger(__name__)

console = Console()


# ==================== SALIDA ====================

def _show_report(report, elapsed: float):
    """Resumen legible: totales y comprobaciones en tablas rich."""
    table = Table(title=f"{report.kind} ({elapsed:.2f} s)")
    table.add_column("magnitud")
    table.add_column("valor")
    for key, value in sorted(report.totals.items()):
        table.add_row(escape(str(key)), escape(_plain(value)))
    for key, value in sorted(report.checks.items()):
        table.add_row(escape(f"check:{key}"), "✅" if _passed(value) else "❌")
    console.print(table)


def _plain(value) -> str:
    if isinstance(value, dict):
        return ", ".join(f"{k}={_plain(v)}" for k, v in sorted(value.items()))
    if isinstance(value, (list, tuple)):
        return ", ".join(_plain(v) for v in value)
    return format_number(value)


def _passed(value) -> bool:
    return value.get('ok', False) if isinstance(value, dict) else bool(value)


def _fail(error: MulticargaError):
    console.print(f"❌ {type(error).__name__}: {escape(str(error))}", markup=True)
    raise SystemExit(error.exit_code)


def _finish(report, out_dir, fmt, elapsed: float):
    paths = report_writer.write_report(report, fmt=fmt, out_dir=out_dir)
    _show_report(report, elapsed)
    for path in paths:
        console.print(f"📦 {escape(str(path))}")
    logger.info("✅ %s terminado en %.2f s (salida %d)", report.kind, elapsed, report.exit_code)
    if report.exit_code:
        raise SystemExit(report.exit_code)


def _execute(config_path, kind, seed, out_dir, fmt, sweep: bool = False, jobs: int = 1):
    """Carga, valida, ejecuta y escribe. Los errores se traducen a códigos de salida."""
    try:
        config = load_config(config_path, seed=seed, kind=kind)
    except MulticargaError as e:
        _fail(e)
    if sweep and 'sweep' not in config.resolved:
        _fail(ConfigError("El barrido necesita una tabla [sweep.parameters]"))
    only_swept = [key for key in config.sweep if key not in config.protocol]
    if not sweep and only_swept:
        _fail(ConfigError(f"{', '.join(only_swept)} solo aparece en [sweep]: usar el subcomando sweep"))
    out_dir = out_dir or config.out_dir or report_writer.output_dir
    fmt = fmt or config.format or 'csv'

    start = time.perf_counter()
    try:
        report = run_sweep(config, jobs=jobs) if sweep else run_experiment(config)
    except MulticargaError as e:
        logger.error("❌ %s: %s", type(e).__name__, e)
        _fail(e)
    _finish(report, out_dir, fmt, time.perf_counter() - start)


def _common_options(func):
    func = click.option('--format', 'fmt', type=click.Choice(FORMATS), default=None,
                        help='csv (JSON más CSV de pasos) o json')(func)
    func = click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None,
                        help='Directorio de salida')(func)
    func = click.option('--seed', type=int, default=None, help='Semilla (sustituye a la del archivo)')(func)
    func = click.option('--config', 'config_path', type=click.Path(dir_okay=False), required=True,
                        help='Archivo TOML del experimento')(func)
    return func


# ==================== COMANDOS ====================

@click.command('run')
@_common_options
def run_command(config_path, seed, out_dir, fmt):
    """Ejecuta el experimento indicado por ``kind`` en el archivo."""
    _execute(config_path, None, seed, out_dir, fmt)


def _kind_command(kind: str, help_text: str):
    @click.command(kind, help=help_text)
    @_common_options
    def command(config_path, seed, out_dir, fmt):
        _execute(config_path, kind, seed, out_dir, fmt)
    return command


@click.command('sweep')
@_common_options
@click.option('--jobs', type=click.IntRange(min=1), default=1, help='Puntos de la rejilla en paralelo')
def sweep_command(config_path, seed, out_dir, fmt, jobs):
    """Recorre la rejilla [sweep.parameters] (hasta dos parámetros) y agrega un CSV."""
    _execute(config_path, None, seed, out_dir, fmt, sweep=True, jobs=jobs)


def _rational(ctx, param, value):
    if value is None:
        return None
    try:
        return parse_rational(value)
    except MulticargaError as e:
        raise click.BadParameter(str(e)) from e


@click.group('farey')
def farey_group():
    """Sucesiones de Farey, pares de Bézout y selección robusta."""


@farey_group.command('sequence')
@click.argument('order', type=click.IntRange(min=1))
def farey_sequence_command(order):
    """Imprime F_n."""
    sequence = farey_sequence(order)
    console.print(" ".join(str(f) for f in sequence), markup=False)


@farey_group.command('bezout')
@click.argument('u', type=int)
@click.argument('v', type=int)
def farey_bezout_command(u, v):
    """Par (Δn₁, Δn₂) con u·Δn₁ + v·Δn₂ = 1."""
    try:
        dn1, dn2 = bezout(u, v)
    except MulticargaError as e:
        _fail(e)
    console.print(f"({dn1}, {dn2})", markup=False)


@farey_group.command('robust-select')
@click.argument('measured', callback=_rational)
@click.option('--delta', required=True, callback=_rational, help='Incertidumbre de x/y')
@click.option('--eps', required=True, callback=_rational, help='Tolerancia de |xΔn₁ + yΔn₂|')
@click.option('--y', 'y', required=True, callback=_rational, help='Valor de y')
def farey_robust_command(measured, delta, eps, y):
    """Elige (Δn₁, Δn₂) válido para cualquier x/y a distancia <= delta de la medida."""
    try:
        choice = robust_select(measured, delta, eps, y)
    except MulticargaError as e:
        _fail(e)
    if isinstance(choice, RespecifyRequired):
        console.print(f"⚠️ Reespecificar: {choice.reason} (δ máxima {choice.max_delta})", markup=False)
        raise SystemExit(3)
    console.print(f"({choice.dn1}, {choice.dn2})", markup=False)
    console.print(f"centro {choice.center}, orden {choice.order}, intervalo "
                  f"({choice.interval.lower}, {choice.interval.upper})", markup=False)


@farey_group.command('coverage')
@click.argument('order', type=click.IntRange(min=1))
@click.option('--eps', required=True, callback=_rational)
@click.option('--y', 'y', required=True, callback=_rational)
def farey_coverage_command(order, eps, y):
    """Comprueba que los intervalos de vecinos de F_n se solapan."""
    try:
        report = verify_coverage(order, eps, y)
    except MulticargaError as e:
        _fail(e)
    status = "✅" if report.ok else "❌"
    console.print(f"{status} orden {report.order}: {report.pairs_checked} pares, "
                  f"{len(report.violations)} violaciones, margen mínimo {report.min_margin:.3e}", markup=False)
    if not report.ok:
        raise SystemExit(2)


# ==================== CREACIÓN DE LA CLI ====================

def create_cli(config_class=Config):
    """Grupo click con la configuración indicada (los tests pasan una TestConfig)."""

    @click.group(help="Termodinámica con varias cargas conservadas: experimentos reproducibles.")
    @click.version_option(version=__version__, prog_name='multicarga')
    def cli():
        config_class.init_app(config_class)
        report_writer.init_app(config_class)

    cli.add_command(run_command)
    cli.add_command(_kind_command('thermal', "Estado térmico generalizado y sus autoestados."))
    cli.add_command(_kind_command('solve-betas', "Betas que reproducen los promedios objetivo."))
    cli.add_command(_kind_command('trade', "Intercambio de cargas con el baño."))
    cli.add_command(_kind_command('extract', "Extracción de trabajo de varios tipos."))
    cli.add_command(_kind_command('battery', "Baterías explícitas con pesos."))
    cli.add_command(_kind_command('audit', "Auditoría de la segunda ley con unitarios aleatorios."))
    cli.add_command(sweep_command)
    cli.add_command(farey_group)
    return cli


cli = create_cli()


def main():
    cli(prog_name='multicarga')
