# battery.py - Baterías explícitas: escaleras de pesos y unitarios elevados
"""
Cada carga se almacena en un peso: una escalera finita de L peldaños con valor
offset + n·spacing y operador de traslación periódico Γ|n⟩ = |n+1⟩. Un
unitario U sobre s⊗b se eleva a

    Ũ = Σ_ij U_ij |i⟩⟨j| ⊗ Γ_A^{(a_j - a_i)/s_A} ⊗ Γ_B^{(b_j - b_i)/s_B}

que conserva estrictamente cada carga total y conmuta con las traslaciones.

Las evoluciones no montan la matriz conjunta completa: el estado reducido de
s⊗b solo depende de la función característica χ(m) = ⟨ψ|Γ^m|ψ⟩ de cada peso,

    ρ'_il = Σ_jk U_ij ρ_jk U*_lk · Π_q χ_q(m^q_ij - m^q_lk),

exacto sobre el toro. La matriz densa solo se construye para dimensión <= 4096.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .constants import FIRST_LAW_TOL, GUARD_FACTOR, MAX_DIMENSION, SECOND_LAW_TOL, SUPPORT_TOL
from .errors import (
    ArgumentError,
    CommensurabilityError,
    DimensionError,
    GuardBandError,
    PreconditionError,
    UnsupportedMode,
)
from .gge import ChargeSet, charge_averages, free_entropy
from .qcore import (
    DensityMatrix,
    ProductSpace,
    UnitaryOperator,
    apply_unitary,
    matrix_of,
    partial_trace,
    trace_distance,
    von_neumann_entropy,
)

logger = logging.getLogger(__name__)

MODES = ('strict', 'average')

# límite del tensor D⁴ de la evolución por función característica
_MAX_KERNEL_ENTRIES = 10**7


# ==================== ESCALERAS Y PESOS ====================

@dataclass(frozen=True)
class Ladder:
    """Escalera de L peldaños; la escala c se fija a 1 (valor del peldaño = carga almacenada)."""
    size: int
    spacing: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 3:
            raise ArgumentError(f"Una escalera necesita al menos 3 peldaños, no {self.size}")
        if not self.spacing > 0 or not math.isfinite(self.spacing):
            raise ArgumentError(f"El espaciado debe ser positivo, no {self.spacing}")

    @property
    def values(self) -> np.ndarray:
        return self.offset + self.spacing * np.arange(self.size)

    def shift_for(self, gap: float) -> int:
        """Número de peldaños equivalente a un salto de carga; error si no es entero."""
        rungs = gap / self.spacing
        nearest = round(rungs)
        if abs(rungs - nearest) > 1e-9 * max(1.0, abs(rungs)):
            raise CommensurabilityError(
                f"El salto {gap!r} no es múltiplo del espaciado {self.spacing!r}: reescalar la escalera"
            )
        return int(nearest)

    def translation(self, shift: int) -> ShiftOperator:
        return ShiftOperator(self, int(shift))


@dataclass(frozen=True)
class ShiftOperator:
    """Γ^shift sobre el toro de la escalera."""
    ladder: Ladder
    shift: int

    def apply(self, amplitudes) -> np.ndarray:
        return np.roll(np.asarray(amplitudes, dtype=complex), self.shift)

    def matrix(self) -> np.ndarray:
        return np.roll(np.eye(self.ladder.size, dtype=complex), self.shift, axis=0)

    def valid_for(self, weight: WeightState) -> bool:
        try:
            weight.check_guard(abs(self.shift))
        except GuardBandError:
            return False
        return True


@dataclass(frozen=True, eq=False)
class WeightState:
    """Función de onda del peso sobre los peldaños, normalizada."""
    amplitudes: np.ndarray
    ladder: Ladder
    profile: str = 'custom'
    width: float = 0.0

    def __post_init__(self):
        psi = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if psi.size != self.ladder.size:
            raise DimensionError(f"{psi.size} amplitudes para una escalera de {self.ladder.size} peldaños")
        norm = float(np.vdot(psi, psi).real)
        if abs(norm - 1.0) > 1e-12:
            raise ArgumentError(f"Peso no normalizado: ‖ψ‖² = {norm!r}")
        psi.setflags(write=False)
        object.__setattr__(self, 'amplitudes', psi)

    @classmethod
    def gaussian(cls, ladder: Ladder, width: float, center: float | None = None,
                 momentum: float = 0.0) -> WeightState:
        """ψ(n) ∝ exp(-(n - c)²/(4w²))·e^{ipn}: |ψ|² tiene desviación típica w peldaños."""
        if width <= 0:
            raise ArgumentError(f"El ancho debe ser positivo, no {width}")
        n = np.arange(ladder.size)
        center = (ladder.size - 1) / 2 if center is None else center
        psi = np.exp(-((n - center) ** 2) / (4 * width ** 2) + 1j * momentum * n)
        return cls(psi / np.linalg.norm(psi), ladder, profile='gaussian', width=float(width))

    @classmethod
    def plane_wave(cls, ladder: Ladder, momentum_index: int = 0) -> WeightState:
        """Posición uniforme y momento bien definido θ = 2πk/L (exento de banda de guarda)."""
        n = np.arange(ladder.size)
        psi = np.exp(2j * np.pi * momentum_index * n / ladder.size) / np.sqrt(ladder.size)
        return cls(psi, ladder, profile='plane', width=math.inf)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def mean_position(self) -> float:
        return float(np.dot(self.probabilities, self.ladder.values))

    def characteristic(self, shift: int) -> complex:
        """χ(m) = ⟨ψ|Γ^m|ψ⟩."""
        return complex(np.vdot(self.amplitudes, np.roll(self.amplitudes, int(shift))))

    def shifted_position(self, shift: int, other_shift: int) -> complex:
        """⟨ψ|Γ^{-m'} X Γ^{m}|ψ⟩ con m = shift, m' = other_shift."""
        return complex(np.vdot(np.roll(self.amplitudes, int(other_shift)),
                               self.ladder.values * np.roll(self.amplitudes, int(shift))))

    def check_guard(self, max_shift: int) -> None:
        if self.profile == 'plane':
            return
        band = GUARD_FACTOR * max(1, int(max_shift))
        if 2 * band >= self.ladder.size:
            raise GuardBandError(f"La banda de guarda ({band}) no cabe en {self.ladder.size} peldaños")
        edges = np.concatenate([self.amplitudes[:band], self.amplitudes[-band:]])
        if np.max(np.abs(edges)) >= SUPPORT_TOL:
            raise GuardBandError(
                f"El peso tiene amplitud {np.max(np.abs(edges)):.2e} en la banda de guarda de {band} peldaños"
            )


def momentum_distribution(weight: WeightState) -> np.ndarray:
    """α(p) = |⟨p|ψ⟩|² por transformada de Fourier discreta sobre los peldaños."""
    return np.abs(np.fft.fft(weight.amplitudes)) ** 2 / weight.ladder.size


def _momentum_angles(size: int) -> np.ndarray:
    return 2 * np.pi * np.arange(size) / size


# ==================== UNITARIOS ELEVADOS ====================

@dataclass(frozen=True, eq=False)
class LiftedUnitary:
    """Ũ como U sobre s⊗b más un desplazamiento entero por transición y escalera."""
    base: UnitaryOperator
    shifts: np.ndarray
    ladders: tuple
    charge_eigvals: np.ndarray | None = None
    mode: str = 'strict'

    @property
    def dim_sb(self) -> int:
        return self.base.dim

    @property
    def dim(self) -> int:
        return self.dim_sb * int(np.prod([ladder.size for ladder in self.ladders]))

    def max_shift(self, index: int) -> int:
        support = np.abs(self.base.entries) > 0
        return int(np.max(np.abs(self.shifts[index][support]), initial=0))

    def matrix(self) -> UnitaryOperator:
        """Ũ denso; solo para dimensión total <= 4096."""
        if self.dim > MAX_DIMENSION:
            raise DimensionError(f"Ũ tendría dimensión {self.dim} > {MAX_DIMENSION}")
        u = self.base.entries
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for i, j in zip(*np.nonzero(np.abs(u) > 0)):
            unit = np.zeros((self.dim_sb, self.dim_sb))
            unit[i, j] = 1.0
            factors = [unit] + [ladder.translation(self.shifts[q, i, j]).matrix()
                                for q, ladder in enumerate(self.ladders)]
            total += u[i, j] * reduce(np.kron, factors)
        return UnitaryOperator(total)

    def commutator_norms(self) -> dict:
        """
        Cotas (test de Schur) de ‖[Ũ, A_total]‖ sobre peldaños interiores y de
        ‖[Ũ, Γ_q]‖, calculadas bloque a bloque sin montar Ũ.
        """
        if self.mode != 'strict':
            return {}
        u = np.abs(self.base.entries)
        norms = {}
        for q, ladder in enumerate(self.ladders):
            c = self.charge_eigvals[q]
            # entrada del bloque (i, j): U_ij·(a_i - a_j + m_ij·s) en peldaños sin vuelta
            defect = u * np.abs(c[:, None] - c[None, :] + self.shifts[q] * ladder.spacing)
            norms[f"charge_{q}"] = float(np.sqrt(defect.sum(axis=0).max() * defect.sum(axis=1).max()))
            # cada bloque es U_ij·Γ^{m_ij} y las potencias de Γ_q conmutan sobre el toro;
            # el valor denso lo da dense_commutator_norms
            norms[f"translation_{q}"] = 0.0
        return norms

    def dense_commutator_norms(self) -> dict:
        """Normas espectrales exactas sobre la matriz densa, excluyendo los peldaños de borde."""
        if self.mode != 'strict':
            return {}
        big = self.matrix().entries
        sizes = [ladder.size for ladder in self.ladders]
        norms = {}
        interior = np.ones(self.dim, dtype=bool)
        for q, ladder in enumerate(self.ladders):
            band = self.max_shift(q)
            index = np.arange(ladder.size)
            keep = (index >= band) & (index < ladder.size - band)
            interior &= _embed_mask(keep, q, self.dim_sb, sizes)
        for q, ladder in enumerate(self.ladders):
            charge_sb = np.diag(self.charge_eigvals[q])
            total = np.kron(charge_sb, np.eye(self.dim // self.dim_sb))
            total = total + _embed_ladder(np.diag(ladder.values), q, self.dim_sb, sizes)
            commutator = big @ total - total @ big
            masked = commutator[np.ix_(interior, interior)]
            norms[f"charge_{q}"] = float(np.linalg.norm(masked, 2))
            gamma = _embed_ladder(ladder.translation(1).matrix(), q, self.dim_sb, sizes)
            norms[f"translation_{q}"] = float(np.linalg.norm(big @ gamma - gamma @ big, 2))
        return norms


def _embed_ladder(op: np.ndarray, index: int, dim_sb: int, sizes: list) -> np.ndarray:
    factors = [np.eye(dim_sb)] + [op if q == index else np.eye(size) for q, size in enumerate(sizes)]
    return reduce(np.kron, factors)


def _embed_mask(keep: np.ndarray, index: int, dim_sb: int, sizes: list) -> np.ndarray:
    factors = [np.ones(dim_sb, dtype=bool)] + [
        keep if q == index else np.ones(size, dtype=bool) for q, size in enumerate(sizes)
    ]
    return reduce(lambda a, b: np.kron(a, b).astype(bool), factors)


def charge_eigenvalues(charges: ChargeSet, mode: str = 'strict') -> np.ndarray:
    """Autovalores conjuntos (k, D) de cargas diagonales en la base de trabajo."""
    if mode not in MODES:
        raise ArgumentError(f"Modo desconocido {mode!r}")
    if not charges.commuting:
        if mode == 'strict':
            raise UnsupportedMode("Cargas no conmutantes con conservación estricta: usar el modo 'average'")
        return None
    stack = charges.stack()
    off = stack - np.einsum('kii->ki', stack)[:, :, None] * np.eye(charges.dim)
    if np.max(np.abs(off)) > 1e-12:
        raise PreconditionError("Las cargas deben ser diagonales en la base de trabajo")
    return np.einsum('kii->ki', stack).real.copy()


def lift_unitary(U, charge_eigvals, ladders, mode: str = 'strict') -> LiftedUnitary:
    """
    Eleva U a Ũ = Σ U_ij |i⟩⟨j| ⊗ Π_q Γ_q^{(c^q_j - c^q_i)/s_q}. En modo
    'average' no se desplazan los pesos y solo se auditan valores esperados.
    """
    if mode not in MODES:
        raise ArgumentError(f"Modo desconocido {mode!r}")
    base = U if isinstance(U, UnitaryOperator) else UnitaryOperator(U)
    ladders = tuple(ladders)
    if not ladders:
        raise ArgumentError("Se necesita al menos una escalera")
    shifts = np.zeros((len(ladders), base.dim, base.dim), dtype=int)

    if mode == 'average':
        logger.info("⚠️ Modo 'average': solo se comprueban identidades de valores esperados")
        return LiftedUnitary(base=base, shifts=shifts, ladders=ladders, mode=mode)

    if charge_eigvals is None:
        raise UnsupportedMode("La conservación estricta necesita autovalores conjuntos de las cargas")
    eig = np.asarray(charge_eigvals, dtype=float).reshape(len(ladders), -1)
    if eig.shape[1] != base.dim:
        raise DimensionError(f"{eig.shape[1]} autovalores por carga para U de dimensión {base.dim}")
    for q, ladder in enumerate(ladders):
        for i, j in zip(*np.nonzero(np.abs(base.entries) > 0)):
            shifts[q, i, j] = ladder.shift_for(eig[q, j] - eig[q, i])
    eig.setflags(write=False)
    shifts.setflags(write=False)
    return LiftedUnitary(base=base, shifts=shifts, ladders=ladders, charge_eigvals=eig, mode=mode)


def build_U1(basis_change, system_charges, ladders, bath_charges=None) -> LiftedUnitary:
    """Ũ₁: rotación del sistema a su base de cargas, identidad sobre el baño."""
    system_charges = np.atleast_2d(np.asarray(system_charges, dtype=float))
    c = matrix_of(basis_change)
    if bath_charges is None:
        return lift_unitary(c, system_charges, ladders)
    bath_charges = np.atleast_2d(np.asarray(bath_charges, dtype=float))
    db = bath_charges.shape[1]
    joint = system_charges[:, :, None] + bath_charges[:, None, :]
    return lift_unitary(np.kron(c, np.eye(db)), joint.reshape(len(system_charges), -1), ladders)


def swap_gaps(levels, system_charges, bath_pair_charges) -> np.ndarray:
    """ε_q = (c^s_j - c^s_i) - (c^b_{n'} - c^b_n) para el intercambio |i,n'⟩ ↔ |j,n⟩."""
    i, j = levels
    system_charges = np.atleast_2d(np.asarray(system_charges, dtype=float))
    bath_pair_charges = np.atleast_2d(np.asarray(bath_pair_charges, dtype=float))
    return (system_charges[:, j] - system_charges[:, i]) - (bath_pair_charges[:, 1] - bath_pair_charges[:, 0])


def build_U2(levels, system_charges, bath_pair_charges, ladders) -> LiftedUnitary:
    """
    Ũ₂: intercambio |i⟩_s|n'⟩_b ↔ |j⟩_s|n⟩_b sobre s ⊗ {n, n'} elevado a las
    escaleras (identidad fuera del subespacio, términos cruzados con Γ^{±ε}).
    """
    system_charges = np.atleast_2d(np.asarray(system_charges, dtype=float))
    bath_pair_charges = np.atleast_2d(np.asarray(bath_pair_charges, dtype=float))
    if bath_pair_charges.shape[1] != 2:
        raise DimensionError("El par del baño debe tener exactamente dos niveles (n, n')")
    ds = system_charges.shape[1]
    i, j = (int(level) for level in levels)
    if i == j or not (0 <= i < ds and 0 <= j < ds):
        raise ArgumentError(f"Niveles inválidos {levels} para un sistema de dimensión {ds}")
    swap = np.eye(2 * ds)
    a, b = 2 * i + 1, 2 * j
    swap[[a, b]] = swap[[b, a]]
    joint = system_charges[:, :, None] + bath_pair_charges[:, None, :]
    return lift_unitary(swap, joint.reshape(len(system_charges), -1), ladders)


# ==================== EVOLUCIÓN ====================

def _check_weights(lifted: LiftedUnitary, weights) -> tuple:
    weights = tuple(weights) if isinstance(weights, (list, tuple)) else (weights,)
    if len(weights) != len(lifted.ladders):
        raise ArgumentError(f"{len(weights)} pesos para {len(lifted.ladders)} escaleras")
    for q, (weight, ladder) in enumerate(zip(weights, lifted.ladders)):
        if weight.ladder.size != ladder.size:
            raise DimensionError(f"El peso {q} no corresponde a su escalera")
        weight.check_guard(lifted.max_shift(q))
    return weights


def _kernel(lifted: LiftedUnitary, weights, characteristic) -> np.ndarray:
    """K[i,j,k,l] = Π_q f_q(m^q_ij - m^q_lk) con f la función característica de cada peso."""
    d = lifted.dim_sb
    if d ** 4 > _MAX_KERNEL_ENTRIES:
        raise DimensionError(f"Dimensión s⊗b {d} demasiado grande para la evolución por χ")
    kernel = np.ones((d, d, d, d), dtype=complex)
    for q, weight in enumerate(weights):
        m = lifted.shifts[q]
        diff = m[:, :, None, None] - m.T[None, None, :, :]
        unique, inverse = np.unique(diff, return_inverse=True)
        values = np.array([characteristic(weight, int(v)) for v in unique])
        kernel *= values[inverse].reshape(diff.shape)
    return kernel


def _reduce(lifted: LiftedUnitary, rho, kernel) -> DensityMatrix:
    u = lifted.base.entries
    evolved = np.einsum('ij,jk,lk,ijkl->il', u, rho.entries, u.conj(), kernel)
    return DensityMatrix((evolved + evolved.conj().T) / 2)


def evolve_reduced(lifted: LiftedUnitary, rho_sb: DensityMatrix, weights) -> DensityMatrix:
    """tr_w[Ũ(ρ_sb ⊗ |ψ⟩⟨ψ|)Ũ†] por funciones características."""
    if rho_sb.dim != lifted.dim_sb:
        raise DimensionError(f"ρ_sb de dimensión {rho_sb.dim} para Ũ sobre {lifted.dim_sb}")
    if lifted.mode == 'average':
        return apply_unitary(rho_sb, lifted.base)
    weights = _check_weights(lifted, weights)
    return _reduce(lifted, rho_sb, _kernel(lifted, weights, WeightState.characteristic))


def implicit_explicit_gap(rho_sb: DensityMatrix, weights, U, lifted: LiftedUnitary) -> float:
    """Distancia de traza entre la evolución con pesos explícitos y UρU†."""
    target = apply_unitary(rho_sb, U if isinstance(U, UnitaryOperator) else UnitaryOperator(U))
    return trace_distance(evolve_reduced(lifted, rho_sb, weights), target)


@dataclass
class EntropyCheck:
    dS_sb: float
    mixture_error: float
    ok: bool


def _momentum_characteristic(weight: WeightState, shift: int) -> complex:
    # χ(m) = Σ_p α(p)·e^{-iθ_p m}: la misma cantidad desde la distribución de momentos
    alpha = momentum_distribution(weight)
    return complex(np.dot(alpha, np.exp(-1j * _momentum_angles(weight.ladder.size) * shift)))


def entropy_nondecrease_check(lifted: LiftedUnitary, rho_sb: DensityMatrix, weights) -> EntropyCheck:
    """
    ΔS_sb = S(ρ'_sb) - S(ρ_sb) >= -1e-10. Además reconstruye ρ'_sb como mezcla
    Σ α(p)·V(p)ρV(p)† con V(p) = D_p† U D_p y las distribuciones de momento.
    """
    if lifted.mode != 'strict':
        raise PreconditionError("El teorema de entropía necesita un unitario elevado estricto")
    weights = _check_weights(lifted, weights)
    evolved = _reduce(lifted, rho_sb, _kernel(lifted, weights, WeightState.characteristic))
    mixture = _reduce(lifted, rho_sb, _kernel(lifted, weights, _momentum_characteristic))
    dS = von_neumann_entropy(evolved) - von_neumann_entropy(rho_sb)
    error = float(np.max(np.abs(evolved.entries - mixture.entries)))
    ok = dS >= -SECOND_LAW_TOL and error <= 1e-8
    if not ok:
        logger.error("❌ ΔS_sb = %.3e, error de la mezcla %.3e", dS, error)
    return EntropyCheck(dS_sb=float(dS), mixture_error=error, ok=ok)


@dataclass
class ExplicitWorkReport:
    """Trabajo leído en la posición media de cada peso frente al cambio de carga de s⊗b."""
    work: np.ndarray
    charge_change: np.ndarray
    rho_sb: DensityMatrix
    mode: str = 'strict'
    first_law_residual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dF_s: float = math.nan
    second_law_slack: float = math.nan
    second_law_tol: float = math.nan
    checks: dict = field(default_factory=dict)


def second_law_tolerance(lifted: LiftedUnitary, betas, residual, gap: float) -> float:
    """
    Tolerancia de Σβ_qΔW_q <= -ΔF̃_s con pesos de ancho finito: lo que falta a la
    primera ley más gap·Σ_q|β_q|·(rango de C_q), con gap la distancia de traza a
    UρU†. Decrece con el ancho del peso.
    """
    betas = np.asarray(betas, dtype=float).reshape(-1)
    residual = np.asarray(residual, dtype=float).reshape(-1)
    if betas.size != len(lifted.ladders) or residual.size != betas.size:
        raise DimensionError(f"{betas.size} betas y {residual.size} residuos para {len(lifted.ladders)} escaleras")
    if not gap >= 0:
        raise ArgumentError(f"La distancia de traza debe ser no negativa, no {gap}")
    spread = np.ptp(lifted.charge_eigvals, axis=1) if lifted.charge_eigvals is not None else np.zeros(betas.size)
    return float(SECOND_LAW_TOL + np.dot(np.abs(betas), np.abs(residual)) + gap * np.dot(np.abs(betas), spread))


def _system_free_entropy_change(rho_sb: DensityMatrix, evolved: DensityMatrix, system: ChargeSet, betas) -> float:
    if rho_sb.dim % system.dim:
        raise DimensionError(f"El sistema de dimensión {system.dim} no divide a s⊗b ({rho_sb.dim})")
    space = ProductSpace((system.dim, rho_sb.dim // system.dim))
    before = partial_trace(rho_sb, space, keep=[0])
    after = partial_trace(evolved, space, keep=[0])
    return free_entropy(after, system, betas) - free_entropy(before, system, betas)


def explicit_work(lifted: LiftedUnitary, rho_sb: DensityMatrix, weights, charges: ChargeSet | None = None,
                  betas=None, system: ChargeSet | None = None) -> ExplicitWorkReport:
    """
    ΔW_q = ⟨x_q⟩' - ⟨x_q⟩. Con conservación estricta la primera ley
    ΔW_q + Δ⟨C_q⟩_sb = 0 se cumple mientras el peso no toque la banda de guarda.
    En modo 'average' el trabajo se anota como -Δ⟨C_q⟩_sb (solo auditoría).

    Con ``betas`` y las cargas ``system`` del primer factor de s⊗b se evalúa
    además la segunda ley Σβ_qΔW_q <= -ΔF̃_s, válida si el resto de s⊗b empieza
    térmico a esas betas y en producto con el sistema. ``system`` por omisión
    es todo s⊗b (baño trivial, ``charges``).
    """
    evolved = evolve_reduced(lifted, rho_sb, weights)
    if lifted.mode == 'average':
        if charges is None:
            raise ArgumentError("El modo 'average' necesita las cargas de s⊗b")
        change = charge_averages(evolved, charges) - charge_averages(rho_sb, charges)
        report = ExplicitWorkReport(work=-change, charge_change=change, rho_sb=evolved, mode='average',
                                    first_law_residual=np.zeros(len(change)))
    else:
        weights = _check_weights(lifted, weights)
        u = lifted.base.entries
        rho = rho_sb.entries
        # G[i,j,k] = U_ij ρ_jk U*_ik: la traza sobre s⊗b fuerza i = l
        g = np.einsum('ij,jk,ik->ijk', u, rho, u.conj())
        work = []
        for q, weight in enumerate(weights):
            m = lifted.shifts[q]
            factor = np.ones_like(g)
            for r, other in enumerate(weights):
                if r == q:
                    continue
                mr = lifted.shifts[r]
                diff = mr[:, :, None] - mr[:, None, :]
                unique, inverse = np.unique(diff, return_inverse=True)
                values = np.array([other.characteristic(int(v)) for v in unique])
                factor = factor * values[inverse].reshape(diff.shape)
            pairs = np.stack(np.broadcast_arrays(m[:, :, None], m[:, None, :]), axis=-1).reshape(-1, 2)
            unique, inverse = np.unique(pairs, axis=0, return_inverse=True)
            values = np.array([weight.shifted_position(int(a), int(b)) for a, b in unique])
            position = values[np.ravel(inverse)].reshape(g.shape)
            work.append(float(np.sum(g * factor * position).real) - weight.mean_position)
        work = np.array(work)

        change = lifted.charge_eigvals @ (np.diag(evolved.entries).real - np.diag(rho).real)
        report = ExplicitWorkReport(work=work, charge_change=change, rho_sb=evolved, mode='strict',
                                    first_law_residual=work + change)

    report.checks['first_law'] = bool(np.max(np.abs(report.first_law_residual), initial=0.0) <= FIRST_LAW_TOL)
    if betas is None:
        return report

    system = system if system is not None else charges
    if system is None:
        raise ArgumentError("La segunda ley necesita las cargas del sistema")
    betas = np.asarray(betas, dtype=float).reshape(-1)
    if betas.size != len(report.work) or system.k != betas.size:
        raise DimensionError(f"{betas.size} betas para {len(report.work)} cargas")
    gap = trace_distance(evolved, apply_unitary(rho_sb, lifted.base))
    report.dF_s = _system_free_entropy_change(rho_sb, evolved, system, betas)
    report.second_law_slack = float(-report.dF_s - np.dot(betas, report.work))
    report.second_law_tol = second_law_tolerance(lifted, betas, report.first_law_residual, gap)
    report.checks['second_law'] = bool(report.second_law_slack >= -report.second_law_tol)
    if not report.checks['second_law']:
        logger.error("❌ Σβ·ΔW supera a -ΔF̃_s en %.3e (tolerancia %.3e)",
                     -report.second_law_slack, report.second_law_tol)
    return report


def evolved_momentum_distribution(lifted: LiftedUnitary, rho_sb: DensityMatrix, weights, index: int = 0) -> np.ndarray:
    """Distribución de momentos del peso ``index`` tras Ũ (debe coincidir con la inicial)."""
    weights = _check_weights(lifted, weights)
    weight = weights[index]
    u = lifted.base.entries
    g = np.einsum('ij,jk,ik->ijk', u, rho_sb.entries, u.conj())
    for r, other in enumerate(weights):
        if r == index:
            continue
        mr = lifted.shifts[r]
        diff = mr[:, :, None] - mr[:, None, :]
        unique, inverse = np.unique(diff, return_inverse=True)
        values = np.array([other.characteristic(int(v)) for v in unique])
        g = g * values[inverse].reshape(diff.shape)
    m = lifted.shifts[index]
    diff = (m[:, :, None] - m[:, None, :]).reshape(-1)
    phases = np.exp(-1j * np.outer(_momentum_angles(weight.ladder.size), diff))
    return momentum_distribution(weight) * (phases @ g.reshape(-1)).real
