# bathtrade.py - Intercambio de cargas dentro de un baño generalizado
"""
Protocolo de intercambio: permutar dos estados de ocupación de n copias de un
baño de d niveles cambia ⟨A_b⟩ y ⟨B_b⟩ con un coste de entropía libre que se
puede hacer tan pequeño como se quiera eligiendo Δn₁ grande.

La contabilidad se hace sobre vectores de ocupación (n₀, ..., n_{d-1}) y en
espacio logarítmico: Π q_i^{n_i} desborda por abajo en cuanto n₀ llega a unos
pocos miles.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from decimal import ROUND_CEILING, Decimal, localcontext
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from .constants import AFFINE_TOL, MAX_DIMENSION, MAX_DN1
from .errors import ArgumentError, DimensionError, PreconditionError, ResourceError, RoleSwapRequired
from .gge import ChargeSet, InverseTemperatures, gibbs_state
from .numtheory import to_fraction

logger = logging.getLogger(__name__)


def _is_exact(value) -> bool:
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


# ==================== TIPOS ====================

@dataclass(frozen=True, eq=False)
class BathSpec:
    """
    Baño de d >= 3 niveles con cargas (a_i, b_i) por nivel y betas (β_A, β_B).
    Las entradas racionales (int o Fraction) se conservan exactas para las
    comprobaciones de validate_bath y choose_m.
    """
    level_charges: tuple
    betas: tuple

    def __post_init__(self):
        levels = tuple((a, b) for a, b in self.level_charges)
        if len(levels) < 3:
            raise ArgumentError(f"El baño necesita al menos 3 niveles, tiene {len(levels)}")
        betas = tuple(self.betas)
        if len(betas) != 2:
            raise ArgumentError("El baño de intercambio usa exactamente dos betas (β_A, β_B)")
        for value in itertools.chain(itertools.chain.from_iterable(levels), betas):
            if not math.isfinite(float(value)):
                raise ArgumentError(f"Valor no finito en el baño: {value!r}")
        object.__setattr__(self, 'level_charges', levels)
        object.__setattr__(self, 'betas', betas)

    @property
    def d(self) -> int:
        return len(self.level_charges)

    @property
    def a(self) -> tuple:
        return tuple(level[0] for level in self.level_charges)

    @property
    def b(self) -> tuple:
        return tuple(level[1] for level in self.level_charges)

    @property
    def exact(self) -> bool:
        return all(_is_exact(v) for v in self.a + self.b + self.betas)

    @cached_property
    def log_populations(self) -> np.ndarray:
        beta_a, beta_b = (float(v) for v in self.betas)
        exponents = -beta_a * np.array(self.a, dtype=float) - beta_b * np.array(self.b, dtype=float)
        return exponents - logsumexp(exponents)

    @property
    def populations(self) -> np.ndarray:
        return np.exp(self.log_populations)

    def charge_set(self) -> ChargeSet:
        return ChargeSet(
            (np.diag(np.array(self.a, dtype=float)), np.diag(np.array(self.b, dtype=float))),
            names=('A', 'B'),
        )

    def thermal_state(self):
        return gibbs_state(self.charge_set(), InverseTemperatures([float(v) for v in self.betas]))

    def swap_levels(self) -> BathSpec:
        """Intercambia los niveles 1 y 2 (los papeles de x e y)."""
        levels = list(self.level_charges)
        levels[1], levels[2] = levels[2], levels[1]
        return BathSpec(level_charges=tuple(levels), betas=self.betas)


@dataclass(frozen=True)
class OccupationPair:
    """Dos vectores de ocupación con el mismo número de copias que solo difieren en los niveles 0, 1 y 2."""
    n: tuple
    n_prime: tuple

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        n_prime = tuple(int(v) for v in self.n_prime)
        if len(n) != len(n_prime) or len(n) < 3:
            raise ArgumentError(f"Ocupaciones de longitudes inválidas: {len(n)} y {len(n_prime)}")
        if min(n + n_prime) < 0:
            raise ArgumentError(f"Ocupaciones negativas: {n}, {n_prime}")
        if sum(n) != sum(n_prime):
            raise ArgumentError(f"Número de copias distinto: {sum(n)} != {sum(n_prime)}")
        if n[3:] != n_prime[3:]:
            raise ArgumentError("Las ocupaciones solo pueden diferir en los tres primeros niveles")
        object.__setattr__(self, 'n', n)
        object.__setattr__(self, 'n_prime', n_prime)

    @property
    def copies(self) -> int:
        return sum(self.n)

    @property
    def dn1(self) -> int:
        return self.n_prime[1] - self.n[1]

    @property
    def dn2(self) -> int:
        return self.n_prime[2] - self.n[2]


@dataclass(frozen=True)
class TradeOutcome:
    """
    Efecto de una permutación |n⟩ ↔ |n'⟩ sobre el baño. ``delta_q`` puede
    desbordar a 0.0; ``log_abs_delta_q`` conserva la magnitud.
    """
    dn1: int
    dn2: int
    delta_q: float
    log_abs_delta_q: float
    dA_b: float
    dB_b: float
    dF_b: float
    gap: float
    charge_gap_a: float = 0.0
    charge_gap_b: float = 0.0
    multiplicity: int = 1
    repetitions: int = 1
    sign_flip: bool = False

    def within_bound(self, y) -> bool:
        """
        0 < ΔF̃_b <= y·Δq comparando con signo. Como ΔF̃_b = Δq·s basta el signo
        de Δq, aunque su magnitud desborde. Un paso elegido con ``sign_flip``
        tiene s en [-y, 0) y cumple la cota reflejada ΔF̃_b <= -y·Δq.
        """
        if self.gap == 0 or not math.isfinite(self.log_abs_delta_q):
            return False
        sign = math.copysign(1.0, self.delta_q)
        bound = -float(y) if self.sign_flip else float(y)
        positive = sign * self.gap > 0
        return positive and sign * (bound - self.gap) >= -abs(bound) * 1e-12


@dataclass
class BathValidation:
    accepted: bool
    x: float
    y: float
    failures: list = field(default_factory=list)


@dataclass
class TradePlan:
    """Plan de intercambio: pasos distintos con su número de repeticiones y los totales."""
    charge: str
    target: float
    budget: float
    steps: list = field(default_factory=list)
    total_dA: float = 0.0
    total_dB: float = 0.0
    total_dF: float = 0.0

    @property
    def total_target(self) -> float:
        return self.total_dA if self.charge == 'A' else self.total_dB


# ==================== OPERACIONES ====================

def exact_gaps(spec: BathSpec):
    """(x, y) exactos si el baño es racional; si no, como Fraction del flotante."""
    beta_a, beta_b = (to_fraction(v) for v in spec.betas)
    a = [to_fraction(v) for v in spec.a[:3]]
    b = [to_fraction(v) for v in spec.b[:3]]
    x = beta_a * (a[1] - a[0]) + beta_b * (b[1] - b[0])
    y = beta_a * (a[2] - a[0]) + beta_b * (b[2] - b[0])
    return x, y


def xy(spec: BathSpec):
    """Gaps adimensionales x = β_A(a₁-a₀) + β_B(b₁-b₀) e y (análogo con el nivel 2)."""
    x, y = exact_gaps(spec)
    return float(x), float(y)


def validate_bath(spec: BathSpec) -> BathValidation:
    """Comprueba que (a_i, b_i) no estén relacionadas afínmente y que x, y no sean ambos nulos."""
    x, y = exact_gaps(spec)
    failures = []

    a = [to_fraction(v) for v in spec.a[:3]]
    b = [to_fraction(v) for v in spec.b[:3]]
    cross = (a[1] - a[0]) * (b[2] - b[0]) - (a[2] - a[0]) * (b[1] - b[0])
    if all(_is_exact(v) for v in spec.a + spec.b):
        affine = cross == 0
    else:
        scale = max(1.0, *(abs(float(v)) for v in a + b))
        affine = abs(float(cross)) <= AFFINE_TOL * scale * scale
    if affine:
        failures.append('affine')

    if spec.exact:
        conspiracy = x == 0 and y == 0
    else:
        conspiracy = abs(float(x)) <= AFFINE_TOL and abs(float(y)) <= AFFINE_TOL
    if conspiracy:
        failures.append('no_conspiracy')

    if failures:
        logger.warning("⚠️ Baño rechazado: %s", ', '.join(failures))
    return BathValidation(accepted=not failures, x=float(x), y=float(y), failures=failures)


def choose_m(x, y, dn1: int, sign_flip: bool = False) -> int:
    """
    Entero m con m/Δn₁ < x/y <= (m+1)/Δn₁; con ``sign_flip``, (m-1)/Δn₁ <= x/y < m/Δn₁.
    La comparación es exacta (los flotantes se convierten a su racional binario).
    """
    x, y = to_fraction(x), to_fraction(y)
    if y == 0:
        raise RoleSwapRequired("y = 0: intercambiar los papeles de x e y (niveles 1 y 2)")
    if int(dn1) != dn1 or dn1 < 1:
        raise ArgumentError(f"Δn₁ debe ser un entero positivo, no {dn1}")
    scaled = x / y * int(dn1)
    if sign_flip:
        return math.floor(scaled) + 1
    return math.ceil(scaled) - 1


def minimal_pair(d: int, dn1: int, dn2: int) -> OccupationPair:
    """Ocupaciones mínimas no negativas que realizan (Δn₁, Δn₂); maximizan q_n."""
    if d < 3:
        raise ArgumentError(f"El baño necesita al menos 3 niveles, no {d}")
    n = [0] * d
    n[1] = max(0, -dn1)
    n[2] = max(0, -dn2)
    n[0] = max(0, dn1 + dn2)
    n_prime = list(n)
    n_prime[0] -= dn1 + dn2
    n_prime[1] += dn1
    n_prime[2] += dn2
    return OccupationPair(n=tuple(n), n_prime=tuple(n_prime))


def trade_step(spec: BathSpec, pair: OccupationPair) -> TradeOutcome:
    """
    Permuta |n⟩ y |n'⟩: Δq = q_n - q_{n'} = q_n·(1 - e^{-s}) con s = xΔn₁ + yΔn₂,
    ΔA_b = Δq(a₁₀Δn₁ + a₂₀Δn₂), ΔB_b análogo y ΔF̃_b = Δq·s (ΔS_b = 0).
    """
    if len(pair.n) != spec.d:
        raise DimensionError(f"El par tiene {len(pair.n)} niveles y el baño {spec.d}")
    dn1, dn2 = pair.dn1, pair.dn2
    x, y = exact_gaps(spec)
    gap = float(x * dn1 + y * dn2)
    a10, a20 = float(spec.a[1]) - float(spec.a[0]), float(spec.a[2]) - float(spec.a[0])
    b10, b20 = float(spec.b[1]) - float(spec.b[0]), float(spec.b[2]) - float(spec.b[0])
    charge_gap_a = a10 * dn1 + a20 * dn2
    charge_gap_b = b10 * dn1 + b20 * dn2

    if gap == 0:
        return TradeOutcome(dn1=dn1, dn2=dn2, delta_q=0.0, log_abs_delta_q=-math.inf,
                            dA_b=0.0, dB_b=0.0, dF_b=0.0, gap=0.0,
                            charge_gap_a=charge_gap_a, charge_gap_b=charge_gap_b)

    log_q_n = float(np.dot(pair.n, spec.log_populations))
    log_abs = log_q_n + math.log(abs(math.expm1(-gap)))
    delta_q = math.copysign(math.exp(log_abs), gap)
    return TradeOutcome(
        dn1=dn1, dn2=dn2, delta_q=delta_q, log_abs_delta_q=log_abs,
        dA_b=delta_q * charge_gap_a, dB_b=delta_q * charge_gap_b, dF_b=delta_q * gap,
        gap=gap, charge_gap_a=charge_gap_a, charge_gap_b=charge_gap_b,
    )


def _repetitions(target: float, outcome: TradeOutcome, charge_gap: float):
    """(R, R/R_real) con R = ⌈|η| / |Δq·c|⌉, en Decimal para soportar Δq ~ e^{-10⁴}."""
    with localcontext() as ctx:
        ctx.prec = 40
        magnitude = (Decimal(outcome.log_abs_delta_q) + Decimal(math.log(abs(charge_gap)))).exp()
        real = Decimal(abs(target)) / magnitude
        count = max(1, int(real.to_integral_value(rounding=ROUND_CEILING)))
        return count, float(Decimal(count) / real)


def plan_trade(spec: BathSpec, eta, eps, charge: str = 'A', max_dn1: int = MAX_DN1) -> TradePlan:
    """
    Planifica el intercambio que cambia la carga ``charge`` del baño en η con
    ΣΔF̃_b <= ε. Recorre Δn₁ = 1, 2, ... eligiendo m con choose_m (y sign_flip
    para fijar el signo de ΔA_b) hasta que |ΔX_b/ΔF̃_b| >= |η|/ε. El paso
    elegido se repite R = ⌈|η|/|ΔX_b|⌉ veces sobre copias frescas del baño.
    """
    if charge not in ('A', 'B'):
        raise ArgumentError(f"Carga desconocida {charge!r}: usar 'A' o 'B'")
    eta, eps = float(eta), float(eps)
    if not (math.isfinite(eta) and math.isfinite(eps)) or eps <= 0:
        raise ArgumentError(f"Se necesita η finito y ε > 0 (η={eta}, ε={eps})")
    validation = validate_bath(spec)
    if not validation.accepted:
        raise PreconditionError(f"Baño rechazado: {', '.join(validation.failures)}")

    plan = TradePlan(charge=charge, target=eta, budget=eps)
    if eta == 0:
        return plan

    swapped = False
    working = spec
    x, y = exact_gaps(spec)
    if y == 0:
        logger.info("🔄 y = 0: se intercambian los niveles 1 y 2")
        working, swapped = spec.swap_levels(), True
        x, y = exact_gaps(working)

    direction = 1 if eta > 0 else -1
    best = math.inf
    for dn1 in range(1, int(max_dn1) + 1):
        outcome = None
        for sign_flip in (False, True):
            m = choose_m(x, y, dn1, sign_flip)
            candidate = trade_step(working, minimal_pair(working.d, dn1, -m))
            c = candidate.charge_gap_a if charge == 'A' else candidate.charge_gap_b
            if candidate.gap != 0 and c != 0 and math.copysign(1, candidate.gap) * math.copysign(1, c) == direction:
                outcome = replace(candidate, sign_flip=sign_flip)
                break
        if outcome is None or not outcome.within_bound(y):
            continue

        c = outcome.charge_gap_a if charge == 'A' else outcome.charge_gap_b
        cost = abs(eta) * abs(outcome.gap / c)
        best = min(best, cost)
        if cost > eps:
            continue

        count, overshoot = _repetitions(eta, outcome, c)
        if cost * overshoot > eps:
            continue
        total_target = eta * overshoot
        plan.total_dF = cost * overshoot
        if charge == 'A':
            plan.total_dA = total_target
            plan.total_dB = total_target * outcome.charge_gap_b / c
        else:
            plan.total_dB = total_target
            plan.total_dA = total_target * outcome.charge_gap_a / c
        if swapped:
            outcome = replace(outcome, dn1=outcome.dn2, dn2=outcome.dn1)
        plan.steps.append(replace(outcome, repetitions=count))
        logger.info("✅ Intercambio planificado: Δn₁=%d, Δn₂=%d, %d repeticiones, ΣΔF̃_b=%.3e",
                    outcome.dn1, outcome.dn2, count, plan.total_dF)
        return plan

    raise ResourceError(
        f"No se alcanza |ΔX_b/ΔF̃_b| >= {abs(eta) / eps:.3e} con Δn₁ <= {max_dn1}",
        achieved={'max_dn1': int(max_dn1), 'best_dF': best},
    )


def dense_oracle_trade(spec: BathSpec, n_copies: int, pair: OccupationPair) -> TradeOutcome:
    """
    Oráculo denso: construye la diagonal de tau^{⊗N} en la base producto,
    permuta los estados de ocupación n con los de n' (tantos como el menor de
    los dos bloques) y mide los cambios de ⟨A⟩, ⟨B⟩ y S por diferencia de
    valores esperados, divididos entre esa multiplicidad.
    """
    if pair.copies != n_copies or len(pair.n) != spec.d:
        raise ArgumentError(f"El par {pair} no corresponde a {n_copies} copias de {spec.d} niveles")
    if spec.d ** n_copies > MAX_DIMENSION:
        raise DimensionError(f"d^N = {spec.d ** n_copies} supera el máximo {MAX_DIMENSION}")

    q = spec.populations
    a = np.array(spec.a, dtype=float)
    b = np.array(spec.b, dtype=float)
    ones = np.ones(spec.d)
    populations = np.ones(1)
    total_a = np.zeros(1)
    total_b = np.zeros(1)
    for _ in range(n_copies):
        populations = np.kron(populations, q)
        total_a = np.kron(total_a, ones) + np.kron(np.ones(len(total_a)), a)
        total_b = np.kron(total_b, ones) + np.kron(np.ones(len(total_b)), b)

    basis = list(itertools.product(range(spec.d), repeat=n_copies))
    occupation = [tuple(np.bincount(state, minlength=spec.d)) for state in basis]
    left = [i for i, occ in enumerate(occupation) if occ == pair.n]
    right = [i for i, occ in enumerate(occupation) if occ == pair.n_prime]
    multiplicity = min(len(left), len(right))

    perm = np.arange(len(basis))
    if pair.n != pair.n_prime:
        for i, j in zip(left, right):
            perm[i], perm[j] = j, i
    after = populations[perm]

    def entropy(p):
        p = p[p > 0]
        return float(-np.sum(p * np.log(p)))

    beta_a, beta_b = (float(v) for v in spec.betas)
    dA = float(np.dot(after - populations, total_a)) / multiplicity
    dB = float(np.dot(after - populations, total_b)) / multiplicity
    dS = (entropy(after) - entropy(populations)) / multiplicity
    delta_q = float(populations[left[0]] - populations[right[0]]) if pair.n != pair.n_prime else 0.0
    x, y = xy(spec)
    return TradeOutcome(
        dn1=pair.dn1, dn2=pair.dn2, delta_q=delta_q,
        log_abs_delta_q=math.log(abs(delta_q)) if delta_q else -math.inf,
        dA_b=dA, dB_b=dB, dF_b=beta_a * dA + beta_b * dB - dS,
        gap=x * pair.dn1 + y * pair.dn2, multiplicity=multiplicity,
    )
