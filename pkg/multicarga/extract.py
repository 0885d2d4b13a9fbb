# extract.py - Extracción de combinaciones de cargas y auditoría de la segunda ley
"""
Protocolo de extracción: primero se rota ρ_s a la base de autoestados de
Σβ_iA_i (paso que satura la segunda ley) y después se llevan sus poblaciones
hasta las de tau_s con intercambios de dos niveles contra pares de estados de
ocupación del baño, moviendo como mucho δp de población en cada paso.

Cada intercambio |i⟩_s|n'⟩_b ↔ |j⟩_s|n⟩_b se contabiliza con las poblaciones
condicionadas del par de ocupación, Q₀ = q_n/(q_n + q_n') = 1/(1 + e^{-s}),
es decir, contra un baño virtual de dos niveles. Las entropías se recalculan
exactamente en cada paso; los desarrollos en δp solo se usan en los tests.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import entr, expit, rel_entr

from .bathtrade import BathSpec, OccupationPair, exact_gaps, minimal_pair, plan_trade, validate_bath, xy
from .constants import (
    MAX_EXTRACTION_STEPS,
    PAIR_SEARCH_WINDOW,
    PAIR_TOL_FRACTION,
    RATIONAL_MAX_DENOMINATOR,
    RATIONAL_REL_TOL,
    SECOND_LAW_TOL,
    SUPPORT_TOL,
)
from .errors import (
    ArgumentError,
    DegenerateTarget,
    DimensionError,
    ExcludedRatio,
    InvariantViolation,
    PreconditionError,
    ResourceError,
    StepSizeError,
)
from .gge import ChargeSet, GibbsState, charge_averages, eigenstate_charges, free_entropy, gibbs_state
from .numtheory import bezout, detect_rational, to_fraction
from .qcore import (
    DensityMatrix,
    ProductSpace,
    UnitaryOperator,
    apply_unitary,
    canonical_phases,
    haar_unitary,
    partial_trace,
    tensor,
    von_neumann_entropy,
)

logger = logging.getLogger(__name__)


# ==================== TIPOS ====================

@dataclass(frozen=True, eq=False)
class SystemSpec:
    """ρ_s con sus cargas; autovalores p_i en orden descendente y autovectores ψ_i en columnas."""
    rho: DensityMatrix
    charges: ChargeSet

    def __post_init__(self):
        if self.rho.dim != self.charges.dim:
            raise DimensionError(f"ρ_s tiene dimensión {self.rho.dim} y las cargas {self.charges.dim}")

    @property
    def dim(self) -> int:
        return self.rho.dim

    @property
    def eigen(self):
        w, v = np.linalg.eigh(self.rho.entries)
        order = np.argsort(-w, kind='stable')
        return np.clip(w[order], 0.0, None), canonical_phases(v[:, order])

    @property
    def populations(self) -> np.ndarray:
        return self.eigen[0]


@dataclass(frozen=True)
class ExtractionStep:
    levels: tuple
    pair: OccupationPair
    delta_p: float
    dA_s: float
    dB_s: float
    dA_b: float
    dB_b: float
    dW_A: float
    dW_B: float
    dS_s: float
    dS_b: float
    dF_b: float
    populations: tuple

    @property
    def dn1(self) -> int:
        return self.pair.dn1

    @property
    def dn2(self) -> int:
        return self.pair.dn2


@dataclass
class ExtractionReport:
    """Totales de un protocolo; ``deficit`` = -ΔF̃_s - (β_A·W_A + β_B·W_B)."""
    delta_p: float
    betas: tuple
    W_A: float = 0.0
    W_B: float = 0.0
    rotation_W_A: float = 0.0
    rotation_W_B: float = 0.0
    dF_s: float = 0.0
    bath_dF: float = 0.0
    deficit: float = 0.0
    steps: list = field(default_factory=list)
    final_populations: tuple = ()

    @property
    def step_count(self) -> int:
        return len(self.steps)


@dataclass
class ConvertedWork:
    """Trabajo extraído tras pasar una de las cargas a la otra con el intercambio del baño."""
    into: str
    W_A: float
    W_B: float
    trade_dF: float
    deficit: float
    plan: object = None


@dataclass
class AuditReport:
    trials: int
    seed: int
    max_slack: float = -math.inf
    min_entropy_sum: float = math.inf
    min_bath_dF: float = math.inf
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


# ==================== PIEZAS DEL PROTOCOLO ====================

def bath_spec_from_charges(charges: ChargeSet, betas) -> BathSpec:
    """
    Baño de intercambio a partir de cargas cualesquiera (conmutantes o no):
    cada nivel es un autoestado de Σβ_iA_i con sus promedios ⟨a⟩_i, ⟨b⟩_i,
    ordenados por población descendente.
    """
    if charges.k != 2:
        raise ArgumentError(f"El baño de intercambio usa dos cargas, no {charges.k}")
    levels = eigenstate_charges(charges, betas)
    betas = tuple(float(b) for b in (betas.betas if hasattr(betas, 'betas') else betas))
    return BathSpec(level_charges=tuple((float(e.averages[0]), float(e.averages[1])) for e in levels),
                    betas=betas)


def diagonalize_to_charge_basis(sys: SystemSpec, target_basis: list):
    """
    U_s = Σ_i |φ_i⟩⟨ψ_i|: lleva el i-ésimo autovector de ρ_s (población
    descendente) al i-ésimo autoestado de Σβ_iA_i (también descendente).
    Devuelve (U_s, σ_s) con σ_s diagonal en la base φ.
    """
    if len(target_basis) != sys.dim:
        raise DimensionError(f"{len(target_basis)} estados de base para un sistema de dimensión {sys.dim}")
    p, psi = sys.eigen
    phi = np.column_stack([e.vector for e in target_basis])
    u = UnitaryOperator(phi @ psi.conj().T)
    sigma = DensityMatrix((phi * p) @ phi.conj().T)
    return u, sigma


def _pair_of(pair, d: int) -> OccupationPair:
    if isinstance(pair, OccupationPair):
        return pair
    dn1, dn2 = pair
    return minimal_pair(d, int(dn1), int(dn2))


def select_bath_pair(x, y, target_log_ratio: float, tol: float, nonzero: bool = False):
    """
    Enteros (Δn₁, Δn₂) con |objetivo - (xΔn₁ + yΔn₂)| <= tol.

    Si x/y = u/v es racional, los valores alcanzables forman la red (y/v)·Z y
    solo hay solución cuando |y/v| <= tol (si no, ExcludedRatio). Si no, se
    recorre Δn₁ por |Δn₁| creciente (positivos primero) hasta la ventana de
    búsqueda, con Δn₂ = round((objetivo - xΔn₁)/y).
    """
    tol = float(tol)
    target = float(target_log_ratio)
    if tol <= 0 or not math.isfinite(target):
        raise ArgumentError(f"select_bath_pair necesita tol > 0 y objetivo finito ({tol}, {target})")
    xf, yf = float(x), float(y)
    if xf == 0 and yf == 0:
        raise ArgumentError("x e y no pueden ser ambos nulos")
    if abs(target) <= tol and not nonzero:
        return 0, 0

    if yf == 0:
        spacing = abs(xf)
        if spacing > tol:
            raise ExcludedRatio(f"y = 0 y |x| = {spacing:.3e} > tol = {tol:.3e}", y=0.0)
        k = round(target / xf) or (1 if nonzero else 0)
        return int(k), 0

    exact = all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in (x, y))
    if exact:
        ratio = to_fraction(x) / to_fraction(y)
        ratio = ratio if ratio.denominator <= RATIONAL_MAX_DENOMINATOR else None
    else:
        ratio = detect_rational(xf / yf, RATIONAL_MAX_DENOMINATOR, RATIONAL_REL_TOL)

    if ratio is not None:
        u, v = ratio.numerator, ratio.denominator
        spacing = abs(yf / v)
        if spacing > tol:
            raise ExcludedRatio(
                f"x/y = {u}/{v} racional con |y/v| = {spacing:.3e} > tol = {tol:.3e}", u=u, v=v, y=yf,
            )
        # x·Δn₁ + y·Δn₂ = (y/v)(u·Δn₁ + v·Δn₂)
        k = round(target * v / yf)
        if k == 0 and nonzero:
            k = 1 if target * yf >= 0 else -1
        if u == 0:
            return 0, int(k)
        e1, e2 = bezout(abs(u), v)
        return int(k * e1 * (1 if u > 0 else -1)), int(k * e2)

    steps = np.arange(1, PAIR_SEARCH_WINDOW + 1)
    dn1 = np.concatenate([[0], np.column_stack([steps, -steps]).reshape(-1)])
    dn2 = np.rint((target - xf * dn1) / yf)
    residual = np.abs(target - xf * dn1 - yf * dn2)
    ok = residual <= tol
    if nonzero:
        ok &= (dn1 != 0) | (dn2 != 0)
    if not ok.any():
        raise ResourceError(
            f"Sin par (Δn₁, Δn₂) con |Δn₁| <= {PAIR_SEARCH_WINDOW} a distancia <= {tol:.3e}",
            achieved={'best_residual': float(residual.min())},
        )
    index = int(np.argmax(ok))
    return int(dn1[index]), int(dn2[index])


def swap_population_step(sigma, averages, spec: BathSpec, pair, levels) -> ExtractionStep:
    """
    Intercambia |i⟩_s|n'⟩_b ↔ |j⟩_s|n⟩_b. Con Q₀ = σ(s), Q₁ = 1 - Q₀ y
    s = xΔn₁ + yΔn₂, mueve δp = p_i·Q₁ - p_j·Q₀ del nivel i al j. El baño
    cambia en ΔA_b = -δp(a₁₀Δn₁ + a₂₀Δn₂) (ídem B) y el trabajo sale de las
    primeras leyes: dW = -ΔA_s - ΔA_b.
    """
    if isinstance(sigma, DensityMatrix):
        off = sigma.entries - np.diag(np.diag(sigma.entries))
        if np.any(np.abs(off) > 1e-12):
            raise PreconditionError("σ_s debe ser diagonal en la base de cargas")
        populations = np.diag(sigma.entries).real.copy()
    else:
        populations = np.array(sigma, dtype=float)
    averages = np.asarray(averages, dtype=float)
    if averages.shape != (2, len(populations)):
        raise DimensionError(f"Promedios de forma {averages.shape} para {len(populations)} niveles")
    i, j = (int(level) for level in levels)
    if i == j:
        raise ArgumentError("Los niveles del intercambio deben ser distintos")
    pair = _pair_of(pair, spec.d)

    x, y = xy(spec)
    gap = x * pair.dn1 + y * pair.dn2
    q0, q1 = expit(gap), expit(-gap)
    delta = populations[i] * q1 - populations[j] * q0

    new = populations.copy()
    new[i] -= delta
    new[j] += delta
    bath_before = np.array([q0, q1])
    bath_after = np.array([q0 + delta, q1 - delta])
    if new.min() < -SUPPORT_TOL or bath_after.min() < -SUPPORT_TOL:
        raise StepSizeError(f"El intercambio deja una población negativa (δp = {delta:.3e})")
    new = np.clip(new, 0.0, None)
    bath_after = np.clip(bath_after, 0.0, None)

    a10, a20 = float(spec.a[1]) - float(spec.a[0]), float(spec.a[2]) - float(spec.a[0])
    b10, b20 = float(spec.b[1]) - float(spec.b[0]), float(spec.b[2]) - float(spec.b[0])
    dA_s = delta * (averages[0, j] - averages[0, i])
    dB_s = delta * (averages[1, j] - averages[1, i])
    dA_b = -delta * (a10 * pair.dn1 + a20 * pair.dn2)
    dB_b = -delta * (b10 * pair.dn1 + b20 * pair.dn2)
    dS_s = float(entr(new[[i, j]]).sum() - entr(populations[[i, j]]).sum())
    dS_b = float(entr(bath_after).sum() - entr(bath_before).sum())
    return ExtractionStep(
        levels=(i, j), pair=pair, delta_p=float(delta),
        dA_s=float(dA_s), dB_s=float(dB_s), dA_b=float(dA_b), dB_b=float(dB_b),
        dW_A=float(-dA_s - dA_b), dW_B=float(-dB_s - dB_b),
        dS_s=dS_s, dS_b=dS_b, dF_b=float(rel_entr(bath_after, bath_before).sum()),
        populations=tuple(float(v) for v in new),
    )


def _drive(populations, goal, averages, spec: BathSpec, delta_p: float):
    """Lleva ``populations`` hasta ``goal`` con intercambios de dos niveles (voraz sobre ln(p/t))."""
    p = np.array(populations, dtype=float)
    goal = np.asarray(goal, dtype=float)
    x, y = exact_gaps(spec) if spec.exact else xy(spec)
    tol = PAIR_TOL_FRACTION * delta_p
    steps = []

    while np.max(np.abs(p - goal)) > tol:
        if len(steps) >= MAX_EXTRACTION_STEPS:
            raise ResourceError(f"Más de {MAX_EXTRACTION_STEPS} pasos sin alcanzar el objetivo",
                                achieved={'steps': len(steps)})
        with np.errstate(divide='ignore'):
            log_ratio = np.log(p) - np.log(goal)
        i, j = int(np.argmax(log_ratio)), int(np.argmin(log_ratio))
        mass = p[i] + p[j]
        balanced = p[i] - goal[i] * mass / (goal[i] + goal[j])
        wanted = min(balanced, delta_p * (1 - PAIR_TOL_FRACTION / 4))
        target_log_ratio = math.log((p[i] - wanted) / (p[j] + wanted))

        dn1, dn2 = select_bath_pair(x, y, target_log_ratio, tol, nonzero=True)
        step = swap_population_step(p, averages, spec, (dn1, dn2), (i, j))
        if abs(step.delta_p) > delta_p * (1 + 1e-9):
            raise InvariantViolation(f"|δp| = {abs(step.delta_p):.3e} supera el máximo {delta_p:.3e}")
        steps.append(step)
        p = np.array(step.populations)
        logger.debug("Paso %d: niveles (%d, %d), Δn = (%d, %d), δp = %.3e",
                     len(steps), i, j, dn1, dn2, step.delta_p)
    return p, steps


def _check_protocol_inputs(spec: BathSpec, delta_p: float, thermal: GibbsState):
    if not 0 < delta_p <= 1:
        raise ArgumentError(f"δp debe estar en (0, 1], no {delta_p}")
    if thermal.charges.k != 2:
        raise ArgumentError("El protocolo de extracción usa dos cargas")
    if np.max(np.abs(np.array([float(b) for b in spec.betas]) - thermal.betas.betas)) > 1e-12:
        raise ArgumentError("Las betas del baño y del estado térmico objetivo no coinciden")
    if float(thermal.state.spectrum[0]) <= SUPPORT_TOL:
        raise ArgumentError("El estado térmico objetivo debe tener rango completo")
    validation = validate_bath(spec)
    if not validation.accepted:
        raise PreconditionError(f"Baño rechazado: {', '.join(validation.failures)}")


def _summarize(report: ExtractionReport, rho_before: DensityMatrix, rho_after: DensityMatrix,
               thermal: GibbsState) -> ExtractionReport:
    charges, betas = thermal.charges, thermal.betas
    report.W_A = report.rotation_W_A + sum(s.dW_A for s in report.steps)
    report.W_B = report.rotation_W_B + sum(s.dW_B for s in report.steps)
    report.bath_dF = sum(s.dF_b for s in report.steps)
    report.dF_s = free_entropy(rho_after, charges, betas) - free_entropy(rho_before, charges, betas)
    beta_a, beta_b = betas.betas
    report.deficit = -report.dF_s - (beta_a * report.W_A + beta_b * report.W_B)
    if report.deficit < -SECOND_LAW_TOL:
        raise InvariantViolation(f"Déficit negativo {report.deficit:.3e}: se violaría la segunda ley")
    return report


# ==================== PROTOCOLOS ====================

def run_extraction(sys: SystemSpec, spec: BathSpec, delta_p: float, target: GibbsState) -> ExtractionReport:
    """
    Lleva ρ_s hasta tau_s(β_A, β_B) y devuelve el trabajo extraído de cada tipo.
    El déficit frente a la segunda ley es >= 0 y decrece linealmente con δp.
    """
    _check_protocol_inputs(spec, delta_p, target)
    if sys.charges.k != 2 or sys.dim != target.charges.dim:
        raise DimensionError("El sistema no coincide con las cargas del estado objetivo")

    basis = eigenstate_charges(target.charges, target.betas)
    goal = np.array([e.population for e in basis])
    averages = np.array([e.averages for e in basis]).T
    phi = np.column_stack([e.vector for e in basis])

    _, sigma = diagonalize_to_charge_basis(sys, basis)
    rotation = charge_averages(sigma, target.charges) - charge_averages(sys.rho, target.charges)
    report = ExtractionReport(delta_p=float(delta_p), betas=tuple(target.betas.betas),
                              rotation_W_A=float(-rotation[0]), rotation_W_B=float(-rotation[1]))

    final, report.steps = _drive(sys.populations, goal, averages, spec, delta_p)
    report.final_populations = tuple(float(v) for v in final)
    rho_after = DensityMatrix((phi * final) @ phi.conj().T)
    _summarize(report, sys.rho, rho_after, target)
    logger.info("✅ Extracción: %d pasos, W_A=%.6f, W_B=%.6f, déficit=%.3e",
                report.step_count, report.W_A, report.W_B, report.deficit)
    return report


def run_formation(sigma: DensityMatrix, charges: ChargeSet, spec: BathSpec, delta_p: float,
                  thermal: GibbsState) -> ExtractionReport:
    """Protocolo inverso tau_s → σ: poblaciones primero y rotación final U_s†."""
    _check_protocol_inputs(spec, delta_p, thermal)
    target_sys = SystemSpec(sigma, charges)
    if float(target_sys.populations[-1]) <= SUPPORT_TOL:
        raise ArgumentError("La formación necesita un estado final de rango completo")

    basis = eigenstate_charges(thermal.charges, thermal.betas)
    start = np.array([e.population for e in basis])
    averages = np.array([e.averages for e in basis]).T

    final, steps = _drive(start, target_sys.populations, averages, spec, delta_p)
    # la rotación final U_s† lleva las poblaciones alcanzadas, no las exactas de σ
    phi = np.column_stack([e.vector for e in basis])
    psi = target_sys.eigen[1]
    diagonal = DensityMatrix((phi * final) @ phi.conj().T)
    rho_after = DensityMatrix((psi * final) @ psi.conj().T)
    rotation = charge_averages(rho_after, charges) - charge_averages(diagonal, charges)
    report = ExtractionReport(delta_p=float(delta_p), betas=tuple(thermal.betas.betas),
                              rotation_W_A=float(-rotation[0]), rotation_W_B=float(-rotation[1]),
                              steps=steps, final_populations=tuple(float(v) for v in final))
    _summarize(report, thermal.state, rho_after, thermal)
    logger.info("✅ Formación: %d pasos, W_A=%.6f, W_B=%.6f, déficit=%.3e",
                report.step_count, report.W_A, report.W_B, report.deficit)
    return report


def convert_work(report: ExtractionReport, spec: BathSpec, into: str = 'A', budget_dF: float = 1e-3) -> ConvertedWork:
    """
    Convierte el trabajo de la otra carga en trabajo de tipo ``into`` con el
    intercambio del baño: el baño absorbe W_B (o W_A) y la batería recibe la
    carga intercambiada, con un coste de entropía libre <= budget_dF.
    """
    if into not in ('A', 'B'):
        raise ArgumentError(f"Carga desconocida {into!r}: usar 'A' o 'B'")
    other = 'B' if into == 'A' else 'A'
    amount = report.W_B if into == 'A' else report.W_A
    plan = plan_trade(spec, amount, budget_dF, charge=other)
    W_A = report.W_A - plan.total_dA
    W_B = report.W_B - plan.total_dB
    beta_a, beta_b = report.betas
    deficit = -report.dF_s - (beta_a * W_A + beta_b * W_B)
    logger.info("🔄 Trabajo convertido a %s: W_A=%.6f, W_B=%.3e, coste ΔF̃_b=%.3e",
                into, W_A, W_B, plan.total_dF)
    return ConvertedWork(into=into, W_A=W_A, W_B=W_B, trade_dF=plan.total_dF, deficit=deficit, plan=plan)


def interconversion_rate(rho: DensityMatrix, sigma: DensityMatrix, charges: ChargeSet, betas) -> float:
    """R = (F̃(ρ) - F̃(tau)) / (F̃(σ) - F̃(tau))."""
    tau = gibbs_state(charges, betas).state
    reference = free_entropy(tau, charges, betas)
    denominator = free_entropy(sigma, charges, betas) - reference
    if abs(denominator) <= 1e-12:
        raise DegenerateTarget(f"σ es (casi) térmico: F̃(σ) - F̃(tau) = {denominator:.3e}")
    return (free_entropy(rho, charges, betas) - reference) / denominator


# ==================== AUDITORÍA ====================

def second_law_audit(sys, bath, trials: int, seed: int = 0, unitaries=None) -> AuditReport:
    """
    Aplica unitarios conjuntos sobre ρ_s ⊗ tau_b (Haar con semilla seed + k, o
    los de ``unitaries``) y comprueba, con baterías implícitas:
    β·W <= -ΔF̃_s + 1e-10, ΔS_s + ΔS_b >= -1e-10 y ΔF̃_b >= -1e-10.
    Sin sistema (``sys`` = None) queda el corolario β·W <= 0.
    """
    if trials < 0:
        raise ArgumentError("trials debe ser >= 0")
    tau_b = bath.thermal_state() if isinstance(bath, BathSpec) else bath
    if not isinstance(tau_b, GibbsState):
        raise ArgumentError("El baño debe ser un BathSpec o un GibbsState")
    betas = tau_b.betas
    bath_charges = tau_b.charges

    if sys is None:
        rho_s = DensityMatrix(np.eye(1))
        sys_charges = ChargeSet([np.zeros((1, 1))] * bath_charges.k)
    else:
        rho_s, sys_charges = sys.rho, sys.charges
    if sys_charges.k != bath_charges.k:
        raise DimensionError(f"{sys_charges.k} cargas en el sistema y {bath_charges.k} en el baño")

    space = ProductSpace((rho_s.dim, bath_charges.dim))
    joint = tensor([rho_s, tau_b.state])
    report = AuditReport(trials=len(unitaries) if unitaries is not None else trials, seed=seed)
    f_s = free_entropy(rho_s, sys_charges, betas)
    f_b = free_entropy(tau_b.state, bath_charges, betas)
    s_s, s_b = von_neumann_entropy(rho_s), von_neumann_entropy(tau_b.state)
    a_s, a_b = charge_averages(rho_s, sys_charges), charge_averages(tau_b.state, bath_charges)

    sources = unitaries if unitaries is not None else range(trials)
    for k, source in enumerate(sources):
        if unitaries is None:
            u = haar_unitary(space.dim, np.random.default_rng(seed + k))
        else:
            u = source if isinstance(source, UnitaryOperator) else UnitaryOperator(source)
        evolved = apply_unitary(joint, u)
        rho_s2 = partial_trace(evolved, space, [0])
        rho_b2 = partial_trace(evolved, space, [1])

        work = -(charge_averages(rho_s2, sys_charges) - a_s) - (charge_averages(rho_b2, bath_charges) - a_b)
        dF_s = free_entropy(rho_s2, sys_charges, betas) - f_s
        slack = float(np.dot(betas.betas, work) + dF_s)
        entropy_sum = von_neumann_entropy(rho_s2) - s_s + von_neumann_entropy(rho_b2) - s_b
        dF_b = free_entropy(rho_b2, bath_charges, betas) - f_b

        report.max_slack = max(report.max_slack, slack)
        report.min_entropy_sum = min(report.min_entropy_sum, entropy_sum)
        report.min_bath_dF = min(report.min_bath_dF, dF_b)
        label = seed + k if unitaries is None else k
        if slack > SECOND_LAW_TOL:
            report.violations.append((label, 'second_law', slack))
        if entropy_sum < -SECOND_LAW_TOL:
            report.violations.append((label, 'subadditivity', entropy_sum))
        if dF_b < -SECOND_LAW_TOL:
            report.violations.append((label, 'bath_free_entropy', dF_b))

    if report.ok:
        logger.info("✅ Auditoría de la segunda ley: %d unitarios sin violaciones (holgura máx. %.3e)",
                    report.trials, report.max_slack)
    else:
        logger.error("❌ Auditoría: %d violaciones en %d unitarios", len(report.violations), report.trials)
    return report
