# qcore.py - Álgebra lineal hermítica densa
"""
Sustrato numérico de multicarga: operadores hermíticos, matrices densidad y
unitarios densos de dimensión finita, con las operaciones que usan el resto de
los módulos (exponencial, entropía, traza parcial, distancia de traza...).

Todos los tipos son inmutables tras su construcción: las matrices se guardan
como arreglos de numpy de solo lectura.
"""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np
from scipy import linalg

from .constants import (
    ENTROPY_CLIP,
    HERMITIAN_TOL,
    MAX_DIMENSION,
    PSD_TOL,
    TRACE_TOL,
    UNITARY_TOL,
)
from .errors import ArgumentError, DimensionError, InvariantViolation

logger = logging.getLogger(__name__)


def _square(entries) -> np.ndarray:
    matrix = np.array(entries, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise DimensionError(f"Se esperaba una matriz cuadrada no vacía, no {matrix.shape}")
    if matrix.shape[0] > MAX_DIMENSION:
        raise DimensionError(
            f"Dimensión {matrix.shape[0]} por encima del máximo permitido ({MAX_DIMENSION})"
        )
    return matrix


def _freeze(matrix: np.ndarray) -> np.ndarray:
    matrix.setflags(write=False)
    return matrix


def _hermitize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.conj().T) / 2


def matrix_of(op) -> np.ndarray:
    """Devuelve el arreglo denso de cualquier operador de qcore (o de un ndarray)."""
    if isinstance(op, (HermitianOperator, DensityMatrix, UnitaryOperator)):
        return op.entries
    return np.asarray(op, dtype=complex)


# ==================== TIPOS ====================

@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Observable hermítico denso (cargas A_i, Hamiltonianos)."""
    entries: np.ndarray

    def __post_init__(self):
        matrix = _square(self.entries)
        scale = max(1.0, float(np.max(np.abs(matrix))))
        gap = float(np.max(np.abs(matrix - matrix.conj().T)))
        if gap > HERMITIAN_TOL * scale:
            raise InvariantViolation(f"Operador no hermítico: |H - H†|max = {gap:.3e}")
        object.__setattr__(self, 'entries', _freeze(_hermitize(matrix)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def eigh(self):
        """Pares (autovalores ascendentes, autovectores en columnas)."""
        return linalg.eigh(self.entries)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Estado cuántico: hermítico, traza 1 y semidefinido positivo."""
    entries: np.ndarray

    def __post_init__(self):
        matrix = _square(self.entries)
        gap = float(np.max(np.abs(matrix - matrix.conj().T)))
        if gap > HERMITIAN_TOL:
            raise InvariantViolation(f"Matriz densidad no hermítica: {gap:.3e}")
        matrix = _hermitize(matrix)
        trace = float(np.trace(matrix).real)
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvariantViolation(f"Traza {trace!r} distinta de 1")
        object.__setattr__(self, 'entries', _freeze(matrix))
        smallest = float(self.spectrum[0])
        if smallest < -PSD_TOL:
            raise InvariantViolation(f"Autovalor negativo {smallest:.3e}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def spectrum(self) -> np.ndarray:
        return linalg.eigvalsh(self.entries)

    @classmethod
    def from_populations(cls, populations) -> DensityMatrix:
        return cls(np.diag(np.asarray(populations, dtype=float)))

    @classmethod
    def pure(cls, vector) -> DensityMatrix:
        psi = np.asarray(vector, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> DensityMatrix:
        return cls(np.eye(dim) / dim)


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    """Unitario denso: U·U† = 1 dentro de 1e-10."""
    entries: np.ndarray

    def __post_init__(self):
        matrix = _square(self.entries)
        gap = float(np.max(np.abs(matrix @ matrix.conj().T - np.eye(matrix.shape[0]))))
        if gap > UNITARY_TOL:
            raise InvariantViolation(f"Operador no unitario: |UU† - 1|max = {gap:.3e}")
        object.__setattr__(self, 'entries', _freeze(matrix))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def dagger(self) -> UnitaryOperator:
        return UnitaryOperator(self.entries.conj().T)

    @classmethod
    def identity(cls, dim: int) -> UnitaryOperator:
        return cls(np.eye(dim, dtype=complex))


@dataclass(frozen=True)
class ProductSpace:
    """Factores ordenados de un producto tensorial (p. ej. s ⊗ b ⊗ w_A ⊗ w_B)."""
    factors: tuple

    def __post_init__(self):
        factors = tuple(int(f) for f in self.factors)
        if not factors or any(f < 1 for f in factors):
            raise ArgumentError(f"Factores inválidos: {self.factors}")
        object.__setattr__(self, 'factors', factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.factors))

    def check(self, op) -> None:
        if matrix_of(op).shape[0] != self.dim:
            raise DimensionError(
                f"El operador tiene dimensión {matrix_of(op).shape[0]}, el espacio {self.dim}"
            )


# ==================== OPERACIONES ====================

def _as_hermitian(H) -> HermitianOperator:
    return H if isinstance(H, HermitianOperator) else HermitianOperator(H)


def _same_dim(a, b) -> None:
    if matrix_of(a).shape != matrix_of(b).shape:
        raise DimensionError(
            f"Dimensiones incompatibles: {matrix_of(a).shape} y {matrix_of(b).shape}"
        )


def hermitian_exp(H, scale: float) -> HermitianOperator:
    """exp(scale·H) por descomposición espectral."""
    H = _as_hermitian(H)
    w, v = H.eigh
    return HermitianOperator(_hermitize((v * np.exp(scale * w)) @ v.conj().T))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Entropía en nats; autovalores menores que 1e-14 no contribuyen."""
    spectrum = rho.spectrum[rho.spectrum > ENTROPY_CLIP]
    return float(-np.sum(spectrum * np.log(spectrum)))


def partial_trace(rho: DensityMatrix, space: ProductSpace, keep) -> DensityMatrix:
    """Reducción de rho sobre los factores de ``keep`` (en orden ascendente)."""
    space.check(rho)
    n = len(space.factors)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise ArgumentError(f"Índices {keep} fuera de rango para {n} factores")
    if n > len(string.ascii_lowercase):
        raise ArgumentError("Demasiados factores para la traza parcial")

    rows = string.ascii_lowercase[:n]
    cols = [rows[k] if k not in keep else string.ascii_uppercase[k] for k in range(n)]
    out = ''.join(rows[k] for k in keep) + ''.join(cols[k] for k in keep)
    tensor_ = rho.entries.reshape(space.factors + space.factors)
    reduced = np.einsum(f"{rows}{''.join(cols)}->{out}", tensor_)
    kept_dim = int(np.prod([space.factors[k] for k in keep])) if keep else 1
    return DensityMatrix(reduced.reshape(kept_dim, kept_dim))


def expectation(rho: DensityMatrix, obs) -> float:
    """tr(obs·rho), descartando la parte imaginaria residual."""
    _same_dim(rho, obs)
    return float(np.einsum('ij,ji->', matrix_of(obs), rho.entries).real)


def apply_unitary(rho: DensityMatrix, U: UnitaryOperator) -> DensityMatrix:
    _same_dim(rho, U)
    u = U.entries
    return DensityMatrix(_hermitize(u @ rho.entries @ u.conj().T))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    _same_dim(rho, sigma)
    diff = _hermitize(rho.entries - sigma.entries)
    return float(min(1.0, 0.5 * np.sum(np.abs(linalg.eigvalsh(diff)))))


def tensor(ops):
    """Producto de Kronecker en el orden dado; conserva el tipo si todos coinciden."""
    ops = list(ops)
    if not ops:
        raise ArgumentError("tensor() necesita al menos un operador")
    product = reduce(np.kron, [matrix_of(op) for op in ops])
    kinds = {type(op) for op in ops}
    if len(kinds) == 1:
        kind = kinds.pop()
        if kind in (HermitianOperator, DensityMatrix, UnitaryOperator):
            return kind(product)
    return product


def commutator(a, b) -> np.ndarray:
    x, y = matrix_of(a), matrix_of(b)
    return x @ y - y @ x


def canonical_phases(vectors: np.ndarray) -> np.ndarray:
    """Fija la fase de cada columna: su primera componente de módulo máximo queda real positiva."""
    vectors = np.array(vectors, dtype=complex)
    for i in range(vectors.shape[1]):
        column = vectors[:, i]
        magnitudes = np.abs(column)
        lead = int(np.flatnonzero(magnitudes >= magnitudes.max() - 1e-9)[0])
        vectors[:, i] = column * (abs(column[lead]) / column[lead])
    return vectors


def haar_unitary(dim: int, rng: np.random.Generator) -> UnitaryOperator:
    """Unitario Haar: QR de una matriz gaussiana compleja con corrección de fases."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = linalg.qr(z)
    d = np.diag(r)
    return UnitaryOperator(q * (d / np.abs(d)))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Estado aleatorio de Ginibre con el rango indicado (completo por defecto)."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return DensityMatrix(_hermitize(rho / np.trace(rho).real))
