# numtheory.py - Aritmética racional exacta para la selección robusta
"""
Pares de Bézout, sucesiones de Farey, intervalos alrededor de sus elementos y
la selección robusta de (Δn₁, Δn₂) cuando x/y solo se conoce con una
incertidumbre δ. Todo se calcula con ``fractions.Fraction``; los flotantes solo
entran a través de ``float_to_rational`` y ``parse_rational``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

from .errors import ArgumentError

logger = logging.getLogger(__name__)

Rational = Fraction


def parse_rational(text) -> Fraction:
    """Convierte una cadena decimal ('0.7', '1e-3', '2/3') en un racional exacto."""
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ArgumentError(f"No es un racional válido: {text!r}") from e


def to_fraction(value) -> Fraction:
    """Convierte enteros, decimales, flotantes finitos o cadenas en un racional exacto."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ArgumentError(f"Valor no numérico: {value!r}")
    if isinstance(value, (int, Decimal)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ArgumentError(f"Valor no finito: {value!r}")
        return Fraction(value)
    return parse_rational(value)


def float_to_rational(value, max_denominator: int) -> Fraction:
    """Mejor aproximación racional con denominador acotado (fracciones continuas)."""
    if max_denominator < 1:
        raise ArgumentError("max_denominator debe ser >= 1")
    if isinstance(value, float) and not math.isfinite(value):
        raise ArgumentError(f"Valor no finito: {value!r}")
    return to_fraction(value).limit_denominator(max_denominator)


def detect_rational(value: float, max_denominator: int, rel_tol: float):
    """Devuelve u/v si ``value`` coincide con un racional de denominador acotado, si no None."""
    candidate = float_to_rational(value, max_denominator)
    if abs(float(candidate) - value) <= rel_tol * max(1.0, abs(value)):
        return candidate
    return None


# ==================== BÉZOUT ====================

def extended_gcd(a: int, b: int):
    """Algoritmo de Euclides extendido: (g, s, t) con a·s + b·t = g."""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    return old_r, old_s, old_t


def bezout(u: int, v: int):
    """
    Par canónico (Δn₁, Δn₂) con u·Δn₁ + v·Δn₂ = 1 y |Δn₁| < v, |Δn₂| < u.
    Para u = v = 1 devuelve (0, 1).
    """
    u, v = int(u), int(v)
    if u < 1 or v < 1:
        raise ArgumentError(f"bezout necesita enteros positivos, no ({u}, {v})")
    g, s, _ = extended_gcd(u, v)
    if g != 1:
        raise ArgumentError(f"({u}, {v}) no son coprimos: mcd = {g}")
    dn1 = s % v
    dn2 = (1 - u * dn1) // v
    return dn1, dn2


# ==================== FAREY ====================

@dataclass(frozen=True)
class FareySequence:
    order: int
    elements: tuple

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def neighbors(self):
        return zip(self.elements, self.elements[1:])


def _farey_terms(order: int):
    a, b, c, d = 0, 1, 1, order
    yield a, b
    while c <= order:
        k = (order + b) // d
        a, b, c, d = c, d, k * c - a, k * d - b
        yield a, b


def farey_sequence(order: int) -> FareySequence:
    """Sucesión de Farey completa de orden n por la recurrencia del término siguiente."""
    if order < 1:
        raise ArgumentError(f"El orden de Farey debe ser >= 1, no {order}")
    return FareySequence(order=order, elements=tuple(Fraction(a, b) for a, b in _farey_terms(order)))


def _bracket(target: Fraction, order: int):
    # descenso por medianas (Stern-Brocot) hasta agotar el denominador
    p, q = target.numerator, target.denominator
    lo, hi = (0, 1), (1, 1)
    while True:
        med = (lo[0] + hi[0], lo[1] + hi[1])
        if med[1] > order:
            return Fraction(*lo), Fraction(*hi)
        side = p * med[1] - q * med[0]
        if side == 0:
            return Fraction(*med), Fraction(*med)
        if side > 0:
            lo = med
        else:
            hi = med


def nearest_farey(target, order: int) -> Fraction:
    """Elemento de F_n más cercano a ``target``; en empate gana el denominador menor."""
    target = to_fraction(target)
    if not 0 <= target <= 1:
        raise ArgumentError(f"El objetivo {target} no está en [0, 1]")
    if order < 1:
        raise ArgumentError(f"El orden de Farey debe ser >= 1, no {order}")
    if target.denominator <= order:
        return target
    lo, hi = _bracket(target, order)
    below, above = target - lo, hi - target
    if below < above:
        return lo
    if above < below:
        return hi
    return lo if lo.denominator <= hi.denominator else hi


@dataclass(frozen=True)
class Interval:
    """Intervalo abierto centro ± semiancho, sin el centro."""
    center: Fraction
    half_width: Fraction
    excludes_center: bool = True

    def __post_init__(self):
        if self.half_width <= 0:
            raise ArgumentError("El semiancho del intervalo debe ser positivo")

    @property
    def lower(self) -> Fraction:
        return self.center - self.half_width

    @property
    def upper(self) -> Fraction:
        return self.center + self.half_width

    def contains(self, value) -> bool:
        value = to_fraction(value)
        if self.excludes_center and value == self.center:
            return False
        return self.lower < value < self.upper

    def contains_range(self, lo, hi) -> bool:
        lo, hi = to_fraction(lo), to_fraction(hi)
        if self.excludes_center and lo <= self.center <= hi:
            return False
        return self.lower < lo and hi < self.upper


def farey_interval(center, epsilon, y) -> Interval:
    center, epsilon, y = to_fraction(center), to_fraction(epsilon), to_fraction(y)
    if epsilon <= 0 or y == 0:
        raise ArgumentError("farey_interval necesita epsilon > 0 e y != 0")
    return Interval(center=center, half_width=epsilon / (abs(y) * center.denominator))


@dataclass
class CoverageReport:
    order: int
    pairs_checked: int = 0
    min_margin: float = math.inf
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_coverage(order: int, epsilon, y) -> CoverageReport:
    """
    Comprueba que los intervalos de vecinos adyacentes de F_n se solapan:
    1/(v·v') - (ε/|y|)(1/v + 1/v') < 0 para cada par. El orden debe ser ⌊|y|/ε⌋.
    """
    epsilon, y = to_fraction(epsilon), to_fraction(y)
    if epsilon <= 0 or y == 0:
        raise ArgumentError("verify_coverage necesita epsilon > 0 e y != 0")
    expected = math.floor(abs(y) / epsilon)
    if order != expected or order < 1:
        raise ArgumentError(f"El orden {order} no coincide con ⌊|y|/ε⌋ = {expected}")

    ratio = epsilon / abs(y)
    rn, rd = ratio.numerator, ratio.denominator
    report = CoverageReport(order=order)
    terms = _farey_terms(order)
    a, b = next(terms)
    for c, d in terms:
        report.pairs_checked += 1
        if c * b - a * d != 1 or b + d <= order:
            report.violations.append(('neighbors', Fraction(a, b), Fraction(c, d)))
        excess = rn * (b + d) - rd
        if excess <= 0:
            report.violations.append(('overlap', Fraction(a, b), Fraction(c, d)))
        report.min_margin = min(report.min_margin, excess / (rd * b * d))
        a, b = c, d

    if report.violations:
        logger.error("❌ Cobertura de Farey violada en orden %d: %d pares", order, len(report.violations))
    return report


# ==================== SELECCIÓN ROBUSTA ====================

@dataclass(frozen=True)
class RobustChoice:
    dn1: int
    dn2: int
    center: Fraction
    interval: Interval
    order: int
    shift: int


@dataclass(frozen=True)
class RespecifyRequired:
    """Hay que reducir δ o aumentar ε; ``max_delta`` es la δ que sí habría cabido."""
    reason: str
    order: int
    center: Fraction
    interval: Interval
    max_delta: Fraction


def robust_select(measured_ratio, delta, epsilon, y):
    """
    Elige (Δn₁, Δn₂) = (v*, -(u* + k·v*)) con u*/v* el elemento de Farey de orden
    ⌊|y|/ε⌋ más cercano a la parte fraccionaria de la medida, k = ⌊medida⌋.
    Si [medida - δ, medida + δ] cabe en el intervalo, |xΔn₁ + yΔn₂| < ε para
    cualquier x/y dentro de δ; si no, devuelve RespecifyRequired.
    """
    measured, delta = to_fraction(measured_ratio), to_fraction(delta)
    epsilon, y = to_fraction(epsilon), to_fraction(y)
    if delta < 0 or epsilon <= 0 or y == 0:
        raise ArgumentError("robust_select necesita delta >= 0, epsilon > 0 e y != 0")

    shift = math.floor(measured)
    fractional = measured - shift
    order = max(1, math.floor(abs(y) / epsilon))
    center = nearest_farey(fractional, order)
    interval = farey_interval(center, epsilon, y)

    if interval.contains_range(fractional - delta, fractional + delta):
        return RobustChoice(
            dn1=center.denominator,
            dn2=-(center.numerator + shift * center.denominator),
            center=center, interval=interval, order=order, shift=shift,
        )

    if fractional == center:
        reason = "la medida coincide con el centro excluido del intervalo"
        max_delta = Fraction(0)
    else:
        reason = "la incertidumbre no cabe en el intervalo de Farey"
        max_delta = min(fractional - interval.lower, interval.upper - fractional, abs(fractional - center))
    logger.info("⚠️ Reespecificar ε o δ: %s (δ máx. %s)", reason, max_delta)
    return RespecifyRequired(reason=reason, order=order, center=center, interval=interval, max_delta=max_delta)
