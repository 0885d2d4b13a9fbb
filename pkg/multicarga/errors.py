# errors.py - Jerarquía de errores de multicarga
"""
Errores del paquete. Cada clase lleva el código de salida que usa la CLI:
2 para violaciones de invariantes y fallos numéricos, 3 para razones excluidas
y 4 para configuración inválida.
"""


class MulticargaError(Exception):
    """Error base del paquete."""
    exit_code = 2


class InvariantViolation(MulticargaError):
    """Un objeto o resultado no cumple un invariante declarado."""


class DimensionError(MulticargaError, ValueError):
    """Dimensiones incompatibles o por encima del límite."""


class ArgumentError(MulticargaError, ValueError):
    """Argumento fuera de dominio."""


class SolverError(MulticargaError):
    """El método de Newton no convergió."""

    def __init__(self, message, residual=None, betas=None):
        super().__init__(message)
        self.residual = residual
        self.betas = betas


class RangeError(SolverError):
    """Los promedios objetivo no son alcanzables: las betas divergen."""


class RoleSwapRequired(ArgumentError):
    """y = 0: hay que intercambiar los papeles de x e y."""


class ResourceError(MulticargaError):
    """El objetivo no se alcanza dentro de los límites configurados."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved or {}


class ExcludedRatio(MulticargaError):
    """x/y = u/v racional con |y/v| mayor que la tolerancia."""
    exit_code = 3

    def __init__(self, message, u=None, v=None, y=None):
        super().__init__(message)
        self.u = u
        self.v = v
        self.y = y


class StepSizeError(InvariantViolation):
    """Un paso de intercambio dejaría una población negativa."""


class DegenerateTarget(ArgumentError):
    """El denominador de la tasa de interconversión es nulo."""


class CommensurabilityError(ArgumentError):
    """Un salto de carga no es múltiplo entero del espaciado de la escalera."""


class GuardBandError(InvariantViolation):
    """El peso tiene soporte dentro de la banda de guarda de la escalera."""


class UnsupportedMode(MulticargaError):
    """Modo no implementado (cargas no conmutantes con conservación estricta)."""


class PreconditionError(ArgumentError):
    """No se cumple una precondición de la operación."""


class ConfigError(MulticargaError, ValueError):
    """Configuración de experimento inválida."""
    exit_code = 4
