# experiment.py - Lectura y validación de configuraciones de experimento
"""
Configuraciones en TOML. Los números físicos se escriben preferentemente como
cadenas decimales ("0.7", "1e-3", "2/3") y se leen como racionales exactos.
Las matrices son listas de filas con entradas [re, im] (o reales sueltos).
Todo se valida antes de calcular nada; cualquier fallo es ConfigError.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .bathtrade import BathSpec
from .constants import EXPERIMENT_KINDS, MAX_DIMENSION, PRESETS
from .errors import ConfigError, MulticargaError
from .gge import ChargeSet, gibbs_state
from .numtheory import to_fraction
from .qcore import DensityMatrix

logger = logging.getLogger(__name__)

RANDOMIZED_KINDS = ('battery', 'audit')

FAREY_OPERATIONS = ('sequence', 'bezout', 'robust-select', 'coverage')

# parámetros de protocolo admitidos por tipo de experimento
PROTOCOL_KEYS = {
    'thermal': {'trials'},
    'solve-betas': {'tol'},
    'trade': {'eta', 'eps', 'charge', 'max_dn1'},
    'extract': {'delta_p', 'convert_into', 'budget'},
    'battery': {'width', 'ladder_size', 'spacing', 'mode', 'momentum'},
    'farey': {'operation', 'order', 'u', 'v', 'measured', 'delta', 'eps', 'y'},
    'audit': {'trials'},
}

MAX_SWEEP_PARAMETERS = 2


@dataclass
class ExperimentConfig:
    """Configuración validada: objetos listos para calcular y el diccionario resuelto."""
    kind: str
    seed: int | None = None
    charges: ChargeSet | None = None
    betas: tuple = ()
    targets: tuple = ()
    state: DensityMatrix | None = None
    bath: object = None               # BathSpec o GibbsState
    protocol: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    resolved: dict = field(default_factory=dict)

    @property
    def out_dir(self):
        value = self.output.get('dir')
        return Path(value) if value else None

    @property
    def format(self):
        return self.output.get('format')

    def with_protocol(self, **updates) -> ExperimentConfig:
        """Copia con parámetros de protocolo sustituidos (puntos de un barrido)."""
        resolved = copy.deepcopy(self.resolved)
        resolved.setdefault('protocol', {}).update({k: _echo(v) for k, v in updates.items()})
        return replace(self, protocol={**self.protocol, **updates}, resolved=resolved)


# ==================== NÚMEROS Y MATRICES ====================

def _echo(value):
    if isinstance(value, Fraction):
        return str(value)
    return value


def _number(value, where: str) -> Fraction:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: se esperaba un número, no un booleano")
    try:
        result = to_fraction(value)
    except (MulticargaError, ValueError, TypeError) as e:
        raise ConfigError(f"{where}: número inválido {value!r}") from e
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{where}: valor no finito")
    return result


def _integer(value, where: str) -> int:
    number = _number(value, where)
    if number.denominator != 1:
        raise ConfigError(f"{where}: se esperaba un entero, no {value!r}")
    return int(number)


def _numbers(values, where: str) -> tuple:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{where}: se esperaba una lista no vacía")
    return tuple(_number(v, f"{where}[{i}]") for i, v in enumerate(values))


def _entry(value, where: str) -> complex:
    if isinstance(value, list):
        if len(value) != 2:
            raise ConfigError(f"{where}: las entradas complejas son pares [re, im]")
        return complex(float(_number(value[0], where)), float(_number(value[1], where)))
    return complex(float(_number(value, where)))


def parse_matrix(rows, where: str = 'matrix') -> np.ndarray:
    """Matriz cuadrada por filas con entradas [re, im] o reales."""
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ConfigError(f"{where}: se esperaba una lista de filas")
    n = len(rows)
    if n > MAX_DIMENSION:
        raise ConfigError(f"{where}: dimensión {n} por encima de {MAX_DIMENSION}")
    if any(len(r) != n for r in rows):
        raise ConfigError(f"{where}: la matriz no es cuadrada")
    return np.array([[_entry(v, f"{where}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(rows)])


def parse_charge(entry, where: str):
    """Una carga: nombre de preset, {preset}, {diag} o {matrix}. Devuelve (nombre, matriz)."""
    if isinstance(entry, str):
        entry = {'preset': entry}
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: se esperaba un preset o una tabla")
    sources = [key for key in ('preset', 'diag', 'matrix') if key in entry]
    if len(sources) != 1:
        raise ConfigError(f"{where}: indicar exactamente uno de preset, diag o matrix")
    source = sources[0]
    if source == 'preset':
        if entry['preset'] not in PRESETS:
            raise ConfigError(f"{where}: preset desconocido {entry['preset']!r} (válidos: {', '.join(sorted(PRESETS))})")
        matrix = PRESETS[entry['preset']].copy()
    elif source == 'diag':
        matrix = np.diag([complex(float(v)) for v in _numbers(entry['diag'], f"{where}.diag")])
    else:
        matrix = parse_matrix(entry['matrix'], f"{where}.matrix")
    return entry.get('name'), matrix


def parse_charges(entries, where: str = 'charges') -> ChargeSet:
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{where}: se esperaba una lista no vacía de cargas")
    parsed = [parse_charge(e, f"{where}[{i}]") for i, e in enumerate(entries)]
    names = tuple(name for name, _ in parsed)
    try:
        return ChargeSet([m for _, m in parsed], names=names if all(names) else ())
    except MulticargaError as e:
        raise ConfigError(f"{where}: {e}") from e


def parse_state(table, dim: int | None, where: str = 'state') -> DensityMatrix:
    """Estado del sistema: populations (diagonal), vector (puro) o matrix."""
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: se esperaba una tabla")
    sources = [key for key in ('populations', 'vector', 'matrix') if key in table]
    if len(sources) != 1:
        raise ConfigError(f"{where}: indicar exactamente uno de populations, vector o matrix")
    try:
        if 'populations' in table:
            rho = DensityMatrix.from_populations([float(v) for v in _numbers(table['populations'], where)])
        elif 'vector' in table:
            values = table['vector']
            if not isinstance(values, list) or not values:
                raise ConfigError(f"{where}.vector: se esperaba una lista no vacía")
            vector = np.array([_entry(v, f"{where}.vector[{i}]") for i, v in enumerate(values)])
            rho = DensityMatrix.pure(vector / np.linalg.norm(vector))
        else:
            rho = DensityMatrix(parse_matrix(table['matrix'], f"{where}.matrix"))
    except MulticargaError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{where}: {e}") from e
    if dim is not None and rho.dim != dim:
        raise ConfigError(f"{where}: dimensión {rho.dim}, las cargas tienen dimensión {dim}")
    return rho


def parse_bath(table, betas: tuple, where: str = 'bath'):
    """Baño: ``levels`` [[a_i, b_i], ...] (BathSpec exacto) o ``charges`` (GibbsState)."""
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: se esperaba una tabla")
    bath_betas = _numbers(table['betas'], f"{where}.betas") if 'betas' in table else betas
    if not bath_betas:
        raise ConfigError(f"{where}: faltan las betas del baño")
    try:
        if 'levels' in table:
            levels = table['levels']
            if not isinstance(levels, list) or not all(isinstance(lv, list) and len(lv) == 2 for lv in levels):
                raise ConfigError(f"{where}.levels: se esperaban pares [a_i, b_i]")
            return BathSpec(
                level_charges=tuple(tuple(_number(v, f"{where}.levels[{i}]") for v in lv) for i, lv in enumerate(levels)),
                betas=tuple(bath_betas),
            )
        if 'charges' in table:
            charges = parse_charges(table['charges'], f"{where}.charges")
            if charges.k != len(bath_betas):
                raise ConfigError(f"{where}: {len(bath_betas)} betas para {charges.k} cargas")
            return gibbs_state(charges, [float(b) for b in bath_betas])
    except MulticargaError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{where}: {e}") from e
    raise ConfigError(f"{where}: indicar levels o charges")


# ==================== PROTOCOLO Y BARRIDOS ====================

_TEXT_KEYS = {'charge', 'convert_into', 'mode', 'operation'}
_INTEGER_KEYS = {'trials', 'max_dn1', 'ladder_size', 'order', 'u', 'v'}


def parse_protocol_value(key: str, value, where: str):
    if key in _TEXT_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: se esperaba texto")
        return value
    if key == 'width' and isinstance(value, list):
        return tuple(_number(v, f"{where}[{i}]") for i, v in enumerate(value))
    if key in _INTEGER_KEYS:
        return _integer(value, where)
    return _number(value, where)


def parse_protocol(kind: str, table) -> dict:
    if table is None:
        return {}
    if not isinstance(table, dict):
        raise ConfigError("protocol: se esperaba una tabla")
    unknown = set(table) - PROTOCOL_KEYS[kind]
    if unknown:
        raise ConfigError(f"protocol: parámetros desconocidos para {kind}: {', '.join(sorted(unknown))}")
    return {key: parse_protocol_value(key, value, f"protocol.{key}") for key, value in table.items()}


def parse_sweep(kind: str, table) -> dict:
    """Rejilla de a lo sumo dos parámetros de protocolo; el orden de las claves se conserva."""
    if table is None:
        return {}
    grid = table.get('parameters', {}) if isinstance(table, dict) else None
    if not isinstance(grid, dict):
        raise ConfigError("sweep.parameters: se esperaba una tabla de listas")
    if len(grid) > MAX_SWEEP_PARAMETERS:
        raise ConfigError(f"sweep: como máximo {MAX_SWEEP_PARAMETERS} parámetros, hay {len(grid)}")
    parsed = {}
    for key, values in grid.items():
        if key not in PROTOCOL_KEYS[kind]:
            raise ConfigError(f"sweep: {key!r} no es un parámetro de {kind}")
        if not isinstance(values, list):
            raise ConfigError(f"sweep.parameters.{key}: se esperaba una lista")
        parsed[key] = [parse_protocol_value(key, v, f"sweep.parameters.{key}[{i}]") for i, v in enumerate(values)]
    return parsed


# ==================== VALIDACIÓN POR TIPO ====================

_REQUIREMENTS = {
    'thermal': ('charges', 'betas'),
    'solve-betas': ('charges', 'targets'),
    'trade': ('bath', 'protocol.eta', 'protocol.eps'),
    'extract': ('charges', 'betas', 'state', 'bath', 'protocol.delta_p'),
    'battery': ('charges', 'protocol.width'),
    'farey': ('protocol.operation',),
    'audit': ('bath', 'protocol.trials'),
}

_FAREY_ARGUMENTS = {
    'sequence': ('order',),
    'bezout': ('u', 'v'),
    'robust-select': ('measured', 'delta', 'eps', 'y'),
    'coverage': ('order', 'eps', 'y'),
}


def _check_requirements(config: ExperimentConfig):
    for requirement in _REQUIREMENTS[config.kind]:
        if requirement.startswith('protocol.'):
            key = requirement.split('.', 1)[1]
            present = key in config.protocol or key in config.sweep
        else:
            value = getattr(config, requirement)
            present = value is not None and value != ()
        if not present:
            raise ConfigError(f"Falta {requirement!r}, obligatorio para experimentos {config.kind}")

    if config.kind in RANDOMIZED_KINDS and config.seed is None:
        raise ConfigError(f"Los experimentos {config.kind} son aleatorios: la semilla es obligatoria")
    if config.charges is not None and config.betas and len(config.betas) != config.charges.k:
        raise ConfigError(f"{len(config.betas)} betas para {config.charges.k} cargas")
    if config.charges is not None and config.targets and len(config.targets) != config.charges.k:
        raise ConfigError(f"{len(config.targets)} objetivos para {config.charges.k} cargas")
    if config.kind == 'extract':
        if config.charges.k != 2:
            raise ConfigError("La extracción usa exactamente dos cargas")
        if not isinstance(config.bath, BathSpec):
            raise ConfigError("La extracción necesita un baño con levels")
    if config.kind == 'trade' and not isinstance(config.bath, BathSpec):
        raise ConfigError("El intercambio necesita un baño con levels")
    if config.kind == 'farey':
        operation = config.protocol['operation']
        if operation not in FAREY_OPERATIONS:
            raise ConfigError(f"Operación de Farey desconocida {operation!r}")
        missing = [k for k in _FAREY_ARGUMENTS[operation] if k not in config.protocol and k not in config.sweep]
        if missing:
            raise ConfigError(f"farey {operation}: faltan {', '.join(missing)}")
    for key in ('charge', 'convert_into'):
        if key in config.protocol and config.protocol[key] not in ('A', 'B'):
            raise ConfigError(f"protocol.{key}: usar 'A' o 'B'")
    if config.protocol.get('mode', 'strict') not in ('strict', 'average'):
        raise ConfigError("protocol.mode: usar 'strict' o 'average'")


def build_config(data: dict, seed: int | None = None, kind: str | None = None) -> ExperimentConfig:
    """Valida el diccionario de configuración y construye los objetos de cálculo."""
    if not isinstance(data, dict):
        raise ConfigError("La configuración debe ser una tabla")
    known = {'kind', 'seed', 'charges', 'betas', 'targets', 'state', 'bath', 'protocol', 'output', 'sweep'}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"Claves desconocidas: {', '.join(sorted(unknown))}")

    resolved = copy.deepcopy(data)
    file_kind = data.get('kind')
    if kind is not None and file_kind is not None and file_kind != kind:
        raise ConfigError(f"La configuración es de tipo {file_kind!r}, no {kind!r}")
    kind = kind or file_kind
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"Tipo de experimento desconocido {kind!r} (válidos: {', '.join(EXPERIMENT_KINDS)})")
    resolved['kind'] = kind

    if seed is None and 'seed' in data:
        seed = _integer(data['seed'], 'seed')
    if seed is not None:
        if seed < 0:
            raise ConfigError("La semilla debe ser >= 0")
        resolved['seed'] = int(seed)

    charges = parse_charges(data['charges']) if 'charges' in data else None
    betas = _numbers(data['betas'], 'betas') if 'betas' in data else ()
    targets = _numbers(data['targets'], 'targets') if 'targets' in data else ()
    state = parse_state(data['state'], charges.dim if charges else None) if 'state' in data else None
    bath = parse_bath(data['bath'], betas) if 'bath' in data else None

    output = data.get('output', {})
    if not isinstance(output, dict) or set(output) - {'dir', 'format'}:
        raise ConfigError("output: solo admite dir y format")
    if output.get('format') not in (None, 'csv', 'json'):
        raise ConfigError("output.format: usar 'csv' o 'json'")

    config = ExperimentConfig(
        kind=kind, seed=seed, charges=charges, betas=betas, targets=targets, state=state, bath=bath,
        protocol=parse_protocol(kind, data.get('protocol')),
        output=dict(output),
        sweep=parse_sweep(kind, data.get('sweep')),
        resolved=resolved,
    )
    _check_requirements(config)
    return config


def load_config(path, seed: int | None = None, kind: str | None = None) -> ExperimentConfig:
    """Lee y valida un archivo TOML de experimento."""
    path = Path(path)
    try:
        with open(path, 'rb') as handle:
            data = tomllib.load(handle)
    except OSError as e:
        raise ConfigError(f"No se pudo leer {path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"TOML inválido en {path}: {e}") from e
    config = build_config(data, seed=seed, kind=kind)
    logger.info("✅ Configuración %s cargada desde %s", config.kind, path)
    return config
