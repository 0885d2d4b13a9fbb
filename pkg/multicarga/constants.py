# constants.py

"""
Constantes numéricas compartidas por todos los módulos de multicarga.
Aquí viven las tolerancias para evitar dependencias circulares entre módulos.
"""

import numpy as np

# Tolerancias de los tipos de qcore
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-12
UNITARY_TOL = 1e-10
ENTROPY_CLIP = 1e-14
IMAG_TOL = 1e-12

MAX_DIMENSION = 4096

# Resolución de betas (gge)
JACOBIAN_STEP = 1e-5
NEWTON_MAX_ITER = 60
NEWTON_MAX_HALVINGS = 40
BETA_DIVERGENCE = 1e3
DEGENERACY_TOL = 1e-9

# Baño generalizado
AFFINE_TOL = 1e-12
MAX_DN1 = 10**5

# Extracción
PAIR_SEARCH_WINDOW = 10**4
RATIONAL_MAX_DENOMINATOR = 10**4
RATIONAL_REL_TOL = 1e-12
PAIR_TOL_FRACTION = 0.1
SECOND_LAW_TOL = 1e-10
MAX_EXTRACTION_STEPS = 10**6

# Baterías
GUARD_FACTOR = 4
SUPPORT_TOL = 1e-12
COMMUTATOR_TOL = 1e-10
FIRST_LAW_TOL = 1e-9

# Formato de reportes
CSV_DIGITS = 17

# Presets de cargas para la configuración
_SQRT2 = np.sqrt(2.0)

PRESETS = {
    'sigma_x': np.array([[0, 1], [1, 0]], dtype=complex),
    'sigma_y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'sigma_z': np.array([[1, 0], [0, -1]], dtype=complex),
    'spin1_x': np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQRT2,
    'spin1_y': np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _SQRT2,
    'spin1_z': np.diag([1.0, 0.0, -1.0]).astype(complex),
}

EXPERIMENT_KINDS = [
    'thermal',
    'solve-betas',
    'trade',
    'extract',
    'battery',
    'farey',
    'audit',
]
