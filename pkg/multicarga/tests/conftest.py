import numpy as np
import pytest
from click.testing import CliRunner

from multicarga.bathtrade import BathSpec
from multicarga.cli import create_cli
from multicarga.constants import PRESETS
from multicarga.gge import ChargeSet


class TestConfig:
    """Configuración de pruebas: salida en un directorio temporal y sin handlers de logging."""
    __test__ = False
    OUTPUT_DIR = None
    LOG_LEVEL = 'WARNING'

    @staticmethod
    def init_app(config=None):
        """Inicialización mínima para los tests."""
        pass


@pytest.fixture(scope='function')
def test_config(tmp_path):
    """TestConfig apuntando a un directorio temporal propio del test."""
    TestConfig.OUTPUT_DIR = tmp_path / 'resultados'
    return TestConfig


@pytest.fixture(scope='function')
def cli(test_config):
    """Grupo click creado con la configuración de pruebas."""
    return create_cli(config_class=test_config)


@pytest.fixture(scope='function')
def runner():
    """Runner para los comandos click."""
    return CliRunner()


@pytest.fixture(scope='module')
def accept_bath():
    """Baño de tres niveles aceptado: a = (0,1,0), b = (0,0,1), β = (1, 3/2); x = 1, y = 3/2."""
    from fractions import Fraction
    return BathSpec(level_charges=((0, 0), (1, 0), (0, 1)), betas=(1, Fraction(3, 2)))


@pytest.fixture(scope='module')
def commuting_qubit():
    """Qubit con cargas conmutantes A = diag(0,1), B = diag(0,2)."""
    return ChargeSet((np.diag([0.0, 1.0]), np.diag([0.0, 2.0])), names=('A', 'B'))


@pytest.fixture(scope='module')
def pauli_qubit():
    """Qubit con cargas no conmutantes A = σ_x, B = σ_y."""
    return ChargeSet((PRESETS['sigma_x'], PRESETS['sigma_y']), names=('A', 'B'))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
