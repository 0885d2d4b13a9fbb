# gge.py - Ensambles de Gibbs generalizados
"""
Estado térmico generalizado tau = exp(-Σ β_i A_i) / Z, entropía libre
F̃ = Σ β_i ⟨A_i⟩ - S y el problema inverso de recuperar las betas a partir de
promedios objetivo. Las mismas rutas sirven para cargas conmutantes y no
conmutantes: siempre se exponencia la suma ponderada completa.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .constants import (
    BETA_DIVERGENCE,
    DEGENERACY_TOL,
    ENTROPY_CLIP,
    JACOBIAN_STEP,
    NEWTON_MAX_HALVINGS,
    NEWTON_MAX_ITER,
)
from .errors import ArgumentError, DimensionError, RangeError, SolverError
from .qcore import (
    DensityMatrix,
    HermitianOperator,
    canonical_phases,
    commutator,
    expectation,
    hermitian_exp,
    random_density_matrix,
    von_neumann_entropy,
)

logger = logging.getLogger(__name__)


# ==================== TIPOS ====================

@dataclass(frozen=True, eq=False)
class ChargeSet:
    """Cargas A_1..A_k sobre un mismo espacio."""
    charges: tuple
    names: tuple = ()

    def __post_init__(self):
        charges = tuple(
            c if isinstance(c, HermitianOperator) else HermitianOperator(c) for c in self.charges
        )
        if not charges:
            raise ArgumentError("Un ChargeSet necesita al menos una carga")
        dims = {c.dim for c in charges}
        if len(dims) != 1:
            raise DimensionError(f"Las cargas no comparten dimensión: {sorted(dims)}")
        names = tuple(self.names) or tuple('ABCDEFGH'[i] if i < 8 else f"A{i}" for i in range(len(charges)))
        if len(names) != len(charges):
            raise ArgumentError("Debe haber un nombre por carga")
        object.__setattr__(self, 'charges', charges)
        object.__setattr__(self, 'names', names)

    @property
    def k(self) -> int:
        return len(self.charges)

    @property
    def dim(self) -> int:
        return self.charges[0].dim

    def stack(self) -> np.ndarray:
        return np.stack([c.entries for c in self.charges])

    def weighted(self, betas) -> np.ndarray:
        """Σ β_i A_i como arreglo denso."""
        betas = _betas(betas)
        if len(betas.betas) != self.k:
            raise DimensionError(f"{len(betas.betas)} betas para {self.k} cargas")
        return np.tensordot(betas.betas, self.stack(), axes=1)

    @property
    def commuting(self) -> bool:
        return all(
            np.max(np.abs(commutator(a, b))) <= 1e-10
            for i, a in enumerate(self.charges)
            for b in self.charges[i + 1:]
        )


@dataclass(frozen=True, eq=False)
class InverseTemperatures:
    """Temperaturas inversas β_i (pueden ser negativas)."""
    betas: np.ndarray

    def __post_init__(self):
        betas = np.array(self.betas, dtype=float).reshape(-1)
        if betas.size == 0 or not np.all(np.isfinite(betas)):
            raise ArgumentError(f"Betas inválidas: {self.betas}")
        betas.setflags(write=False)
        object.__setattr__(self, 'betas', betas)

    def __len__(self):
        return len(self.betas)


def _betas(betas) -> InverseTemperatures:
    return betas if isinstance(betas, InverseTemperatures) else InverseTemperatures(betas)


@dataclass(frozen=True, eq=False)
class GibbsState:
    """tau(β) junto con ln Z, las betas y las cargas que lo definen."""
    state: DensityMatrix
    log_partition: float
    betas: InverseTemperatures
    charges: ChargeSet

    @property
    def partition_function(self) -> float:
        return float(np.exp(self.log_partition))

    def reconstruction_error(self) -> float:
        weighted = HermitianOperator(self.charges.weighted(self.betas))
        rebuilt = hermitian_exp(weighted, -1.0).entries * np.exp(-self.log_partition)
        return float(np.max(np.abs(rebuilt - self.state.entries)))


@dataclass(frozen=True, eq=False)
class EigenstateCharges:
    """Autoestado de Σ β_i A_i con su población q_i y sus promedios ⟨A_j⟩."""
    eigenvalue: float
    averages: np.ndarray
    population: float
    vector: np.ndarray


@dataclass
class MinimalityReport:
    """Resultado de la comprobación muestreada de mínima entropía libre."""
    trials: int
    reference: float
    min_gap: float = np.inf
    max_entropy_excess: float = -np.inf
    dual_samples: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


# ==================== OPERACIONES ====================

def gibbs_state(charges: ChargeSet, betas) -> GibbsState:
    """Construye tau = exp(-Σβ_iA_i)/Z desplazando el espectro para evitar desbordes."""
    betas = _betas(betas)
    weighted = HermitianOperator(charges.weighted(betas))
    shift = float(weighted.eigh[0][0])
    shifted = HermitianOperator(weighted.entries - shift * np.eye(charges.dim))
    unnormalized = hermitian_exp(shifted, -1.0).entries
    z = float(np.trace(unnormalized).real)
    state = DensityMatrix(unnormalized / z)
    return GibbsState(state=state, log_partition=float(np.log(z) - shift), betas=betas, charges=charges)


def charge_averages(rho: DensityMatrix, charges: ChargeSet) -> np.ndarray:
    return np.array([expectation(rho, c) for c in charges.charges])


def free_entropy(rho: DensityMatrix, charges: ChargeSet, betas) -> float:
    """F̃(ρ) = Σ_i β_i tr(A_i ρ) - S(ρ), adimensional."""
    betas = _betas(betas)
    return float(np.dot(betas.betas, charge_averages(rho, charges)) - von_neumann_entropy(rho))


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """S(ρ‖σ) = tr ρ ln ρ - tr ρ ln σ; infinita si el soporte de ρ no cabe en el de σ."""
    w, v = linalg.eigh(sigma.entries)
    weights = np.einsum('ki,kl,li->i', v.conj(), rho.entries, v).real
    support = w > ENTROPY_CLIP
    if np.any(weights[~support] > ENTROPY_CLIP):
        return float('inf')
    cross = float(np.sum(weights[support] * np.log(w[support])))
    return -von_neumann_entropy(rho) - cross


def _jacobian(charges: ChargeSet, beta: np.ndarray, step: float) -> np.ndarray:
    columns = []
    for j in range(len(beta)):
        delta = np.zeros_like(beta)
        delta[j] = step
        up = charge_averages(gibbs_state(charges, beta + delta).state, charges)
        down = charge_averages(gibbs_state(charges, beta - delta).state, charges)
        columns.append((up - down) / (2 * step))
    return np.column_stack(columns)


def solve_betas(charges: ChargeSet, targets, init=None, tol: float = 1e-10,
                max_iter: int = NEWTON_MAX_ITER) -> InverseTemperatures:
    """
    Problema inverso: encuentra β con |tr(A_i tau(β)) - objetivo_i| <= tol.

    Newton amortiguado: el jacobiano se estima con diferencias centrales de paso
    1e-5 sobre gibbs_state y el paso se divide a la mitad hasta que la norma
    del residuo baja. Si las betas divergen, los objetivos están fuera del
    conjunto alcanzable y se lanza RangeError.
    """
    targets = np.asarray(targets, dtype=float).reshape(-1)
    if targets.size != charges.k:
        raise DimensionError(f"{targets.size} objetivos para {charges.k} cargas")
    beta = np.zeros(charges.k) if init is None else np.array(_betas(init).betas, dtype=float)

    def residual(b):
        return charge_averages(gibbs_state(charges, b).state, charges) - targets

    r = residual(beta)
    norm = float(np.linalg.norm(r))
    for iteration in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            logger.debug("✅ Betas resueltas en %d iteraciones (residuo %.2e)", iteration, norm)
            return InverseTemperatures(beta)

        jac = _jacobian(charges, beta, JACOBIAN_STEP)
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        scale = 1.0
        for _ in range(NEWTON_MAX_HALVINGS):
            candidate = beta + scale * step
            r_candidate = residual(candidate)
            norm_candidate = float(np.linalg.norm(r_candidate))
            if norm_candidate < norm:
                break
            scale /= 2
        else:
            raise SolverError(
                f"Newton sin descenso tras {NEWTON_MAX_HALVINGS} divisiones del paso "
                f"(residuo {norm:.3e})", residual=norm, betas=beta,
            )
        beta, r, norm = candidate, r_candidate, norm_candidate
        if np.max(np.abs(beta)) > BETA_DIVERGENCE:
            raise RangeError(
                f"Las betas divergen (|β| = {np.max(np.abs(beta)):.3e}): "
                f"objetivos fuera del conjunto alcanzable", residual=norm, betas=beta,
            )

    if np.max(np.abs(r)) <= tol:
        return InverseTemperatures(beta)
    raise SolverError(
        f"Sin convergencia en {max_iter} iteraciones (residuo {norm:.3e})", residual=norm, betas=beta
    )


def eigenstate_charges(charges: ChargeSet, betas) -> list:
    """
    Diagonaliza Σβ_iA_i y devuelve población y promedios de cada autoestado,
    en orden de población descendente. Dentro de cada bloque degenerado la base
    se elige diagonalizando la primera carga restringida al bloque.
    """
    betas = _betas(betas)
    w, v = linalg.eigh(charges.weighted(betas))
    first = charges.charges[0].entries

    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[stop] - w[start] <= DEGENERACY_TOL * max(1.0, abs(w[start])):
            stop += 1
        if stop - start > 1:
            block = v[:, start:stop]
            _, rotation = linalg.eigh(block.conj().T @ first @ block)
            v[:, start:stop] = block @ rotation
        start = stop

    v = canonical_phases(v)
    log_z = logsumexp(-w)
    populations = np.exp(-w - log_z)
    averages = np.einsum('ki,jkl,li->ij', v.conj(), charges.stack(), v).real
    return [
        EigenstateCharges(
            eigenvalue=float(w[i]), averages=averages[i], population=float(populations[i]),
            vector=v[:, i].copy(),
        )
        for i in range(len(w))
    ]


def _orthogonal_perturbation(charges: ChargeSet, rng: np.random.Generator) -> np.ndarray:
    """Perturbación hermítica sin traza y ortogonal (Hilbert-Schmidt) a todas las cargas."""
    dim = charges.dim

    def real_vec(m):
        flat = np.asarray(m).reshape(-1)
        return np.concatenate([flat.real, flat.imag])

    basis = np.column_stack([real_vec(np.eye(dim))] + [real_vec(c.entries) for c in charges.charges])
    q, _ = np.linalg.qr(basis)
    x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    x = real_vec((x + x.conj().T) / 2)
    x = x - q @ (q.T @ x)
    half = dim * dim
    matrix = (x[:half] + 1j * x[half:]).reshape(dim, dim)
    return (matrix + matrix.conj().T) / 2


def verify_minimality(charges: ChargeSet, betas, trials: int, seed: int = 0) -> MinimalityReport:
    """
    Muestrea estados y comprueba que ninguno baja de F̃(tau) - 1e-12. Además,
    para estados con los mismos promedios que tau, comprueba que ninguno supera
    S(tau) + 1e-6 (dual de máxima entropía).
    """
    if trials < 1:
        raise ArgumentError("trials debe ser >= 1")
    betas = _betas(betas)
    rng = np.random.default_rng(seed)
    tau = gibbs_state(charges, betas)
    reference = free_entropy(tau.state, charges, betas)
    tau_averages = charge_averages(tau.state, charges)
    tau_entropy = von_neumann_entropy(tau.state)
    report = MinimalityReport(trials=trials, reference=reference)

    samples = [tau.state]
    samples += [DensityMatrix.pure(e.vector) for e in eigenstate_charges(charges, betas)]
    for i in range(trials):
        if i % 2 == 0:
            rank = int(rng.integers(1, charges.dim + 1))
            samples.append(random_density_matrix(charges.dim, rng, rank=rank))
        else:
            mix = float(rng.uniform(0.0, 1.0))
            other = random_density_matrix(charges.dim, rng)
            samples.append(DensityMatrix((1 - mix) * tau.state.entries + mix * other.entries))

    for rho in samples:
        gap = free_entropy(rho, charges, betas) - reference
        report.min_gap = min(report.min_gap, gap)
        if gap < -1e-12:
            report.violations.append(('free_entropy', rho, gap))

    floor = float(tau.state.spectrum[0])
    for _ in range(trials):
        x = _orthogonal_perturbation(charges, rng)
        norm = float(np.max(np.abs(linalg.eigvalsh(x)))) if np.any(x) else 0.0
        if norm == 0.0:
            continue
        t = float(rng.uniform(0.1, 1.0)) * 0.5 * floor / norm
        rho = DensityMatrix(tau.state.entries + t * x)
        if np.max(np.abs(charge_averages(rho, charges) - tau_averages)) > 1e-6:
            continue
        report.dual_samples += 1
        excess = von_neumann_entropy(rho) - tau_entropy
        report.max_entropy_excess = max(report.max_entropy_excess, excess)
        if excess > 1e-6:
            report.violations.append(('max_entropy', rho, excess))

    if report.ok:
        logger.info("✅ Minimalidad verificada: %d muestras, margen mínimo %.3e",
                    len(samples), report.min_gap)
    else:
        logger.warning("❌ %d violaciones de minimalidad", len(report.violations))
    return report
