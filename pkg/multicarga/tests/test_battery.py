"""
Tests para las baterías explícitas y los unitarios elevados.
"""
import numpy as np
import pytest

from multicarga.battery import (
    Ladder,
    WeightState,
    build_U1,
    build_U2,
    charge_eigenvalues,
    entropy_nondecrease_check,
    evolve_reduced,
    evolved_momentum_distribution,
    explicit_work,
    implicit_explicit_gap,
    lift_unitary,
    momentum_distribution,
    second_law_tolerance,
    swap_gaps,
)
from multicarga.errors import (
    ArgumentError,
    CommensurabilityError,
    DimensionError,
    GuardBandError,
    PreconditionError,
    UnsupportedMode,
)
from multicarga.gge import ChargeSet, gibbs_state
from multicarga.qcore import DensityMatrix, apply_unitary, haar_unitary, random_density_matrix, von_neumann_entropy


@pytest.fixture(scope='module')
def qutrit_charges():
    """Qutrit con cargas enteras conmutantes: saltos de hasta 2 peldaños."""
    return ChargeSet((np.diag([0.0, 1.0, 2.0]), np.diag([0.0, 2.0, 1.0])), names=('A', 'B'))


def _setup(charges, size, seed):
    rng = np.random.default_rng(seed)
    U = haar_unitary(charges.dim, rng)
    rho = random_density_matrix(charges.dim, rng)
    ladders = [Ladder(size) for _ in range(charges.k)]
    lifted = lift_unitary(U, charge_eigenvalues(charges), ladders)
    return U, rho, ladders, lifted


class TestEscaleras:
    """Tests de Ladder, ShiftOperator y WeightState."""

    def test_escalera_pequena(self):
        with pytest.raises(ArgumentError):
            Ladder(2)

    def test_espaciado_invalido(self):
        with pytest.raises(ArgumentError):
            Ladder(8, spacing=0.0)

    def test_valores(self):
        ladder = Ladder(4, spacing=0.5, offset=1.0)
        assert np.allclose(ladder.values, [1.0, 1.5, 2.0, 2.5])
        assert ladder.shift_for(2.0) == 4
        assert ladder.shift_for(-0.5) == -1

    def test_no_conmensurable(self):
        with pytest.raises(CommensurabilityError):
            Ladder(8).shift_for(0.5)

    def test_traslacion(self):
        ladder = Ladder(4)
        shift = ladder.translation(1)
        assert np.allclose(shift.apply([1, 0, 0, 0]), [0, 1, 0, 0])
        assert np.allclose(shift.matrix() @ np.array([0, 0, 0, 1]), [1, 0, 0, 0])

    def test_gaussiana(self):
        ladder = Ladder(256)
        weight = WeightState.gaussian(ladder, 8.0)
        p = weight.probabilities
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        mean = float(np.dot(p, ladder.values))
        assert mean == pytest.approx(127.5, abs=1e-9)
        assert np.sqrt(np.dot(p, (ladder.values - mean) ** 2)) == pytest.approx(8.0, rel=1e-6)
        assert weight.characteristic(0) == pytest.approx(1.0)

    def test_no_normalizado(self):
        with pytest.raises(ArgumentError):
            WeightState(np.ones(4), Ladder(4))

    def test_momentos_normalizados(self):
        weight = WeightState.gaussian(Ladder(128), 4.0, momentum=0.3)
        assert momentum_distribution(weight).sum() == pytest.approx(1.0, abs=1e-12)

    def test_banda_de_guarda(self):
        weight = WeightState.gaussian(Ladder(64), 10.0)
        with pytest.raises(GuardBandError):
            weight.check_guard(2)
        assert not Ladder(64).translation(2).valid_for(weight)
        assert Ladder(64).translation(2).valid_for(WeightState.plane_wave(Ladder(64)))


class TestElevacion:
    """Tests de lift_unitary, build_U1, build_U2 y las normas de los conmutadores."""

    def test_identidad(self, qutrit_charges):
        ladders = [Ladder(16), Ladder(16)]
        lifted = lift_unitary(np.eye(3), charge_eigenvalues(qutrit_charges), ladders)
        assert not lifted.shifts.any()
        assert all(value == 0.0 for value in lifted.commutator_norms().values())

    def test_desplazamientos(self, qutrit_charges):
        _, _, _, lifted = _setup(qutrit_charges, 32, seed=3)
        eig = charge_eigenvalues(qutrit_charges)
        for q in range(2):
            assert np.array_equal(lifted.shifts[q], (eig[q][None, :] - eig[q][:, None]).astype(int))
        assert lifted.max_shift(0) == 2

    def test_normas_conmutadores(self, qutrit_charges):
        _, _, _, lifted = _setup(qutrit_charges, 32, seed=4)
        norms = lifted.commutator_norms()
        assert set(norms) == {'charge_0', 'translation_0', 'charge_1', 'translation_1'}
        assert all(value <= 1e-10 for value in norms.values())

    def test_normas_densas(self, qutrit_charges):
        """Sobre la matriz densa (3·8·8) las normas interiores son nulas."""
        _, _, _, lifted = _setup(qutrit_charges, 8, seed=5)
        assert lifted.dim == 192
        assert lifted.matrix().dim == 192
        norms = lifted.dense_commutator_norms()
        assert all(value <= 1e-10 for value in norms.values()), norms

    def test_traslaciones_por_bloques_y_densas(self):
        """Cada bloque U_ij·Γ^m conmuta con Γ_q: la cota por bloques y la norma densa son nulas."""
        lifted = build_U2((0, 1), [[0, 1], [0, 2]], [[0, 3], [0, 1]], [Ladder(8), Ladder(8)])
        assert lifted.shifts.any()
        blocks = lifted.commutator_norms()
        dense = lifted.dense_commutator_norms()
        for q in range(2):
            assert blocks[f'translation_{q}'] == 0.0
            assert dense[f'translation_{q}'] <= 1e-12

    def test_matriz_demasiado_grande(self, qutrit_charges):
        _, _, _, lifted = _setup(qutrit_charges, 1024, seed=6)
        with pytest.raises(DimensionError):
            lifted.matrix()

    def test_no_conmensurable(self):
        charges = ChargeSet([np.diag([0.0, 0.5])])
        U = haar_unitary(2, np.random.default_rng(0))
        with pytest.raises(CommensurabilityError):
            lift_unitary(U, charge_eigenvalues(charges), [Ladder(16)])
        lifted = lift_unitary(U, charge_eigenvalues(charges), [Ladder(16, spacing=0.5)])
        assert lifted.shifts[0, 0, 1] == 1

    def test_no_conmutantes_estricto(self, pauli_qubit):
        with pytest.raises(UnsupportedMode):
            charge_eigenvalues(pauli_qubit, 'strict')
        assert charge_eigenvalues(pauli_qubit, 'average') is None

    def test_gaps_del_intercambio(self):
        system = [[0, 1], [0, 2]]
        assert np.allclose(swap_gaps((0, 1), system, [[0, 1], [0, 2]]), [0, 0])
        assert np.allclose(swap_gaps((0, 1), system, [[0, 3], [0, 1]]), [-2, 1])

    def test_build_U2(self):
        system = [[0, 1], [0, 2]]
        lifted = build_U2((0, 1), system, [[0, 3], [0, 1]], [Ladder(32), Ladder(32)])
        assert tuple(lifted.shifts[:, 1, 2]) == (-2, 1)
        assert tuple(lifted.shifts[:, 2, 1]) == (2, -1)
        assert np.allclose(np.abs(lifted.base.entries[[1, 2], [2, 1]]), 1.0)

    def test_build_U2_gaps_iguales(self):
        """Con ε = 0 el peso no se mueve y la evolución es exactamente UρU†."""
        lifted = build_U2((0, 1), [[0, 1], [0, 2]], [[0, 1], [0, 2]], [Ladder(64), Ladder(64)])
        assert not lifted.shifts.any()
        rho = random_density_matrix(4, np.random.default_rng(9))
        weights = [WeightState.gaussian(ladder, 1.0) for ladder in lifted.ladders]
        assert implicit_explicit_gap(rho, weights, lifted.base, lifted) <= 1e-12

    def test_build_U1_diagonal(self):
        lifted = build_U1(np.eye(2), [[0, 1]], [Ladder(16)])
        assert not lifted.shifts.any()

    def test_build_U1_rotacion(self):
        """Rotación |+⟩: saltos de ±1 peldaño donde c_ij une autovalores distintos."""
        hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        lifted = build_U1(hadamard, [[0, 1]], [Ladder(64)])
        assert np.array_equal(lifted.shifts[0], [[0, 1], [-1, 0]])
        rho = random_density_matrix(2, np.random.default_rng(16))
        weights = [WeightState.plane_wave(lifted.ladders[0])]
        assert implicit_explicit_gap(rho, weights, lifted.base, lifted) <= 1e-10

    def test_build_U1_identidad_en_el_bano(self):
        hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        lifted = build_U1(hadamard, [[0, 1]], [Ladder(16)], bath_charges=[[0, 2]])
        assert lifted.dim == 4 * 16
        assert lifted.shifts[0, 0, 2] == 1
        assert lifted.shifts[0, 1, 3] == 1
        assert lifted.shifts[0, 0, 1] == 0

    def test_build_U2_trabajo_en_la_escalera(self):
        """La posición media de cada peso reproduce el trabajo implícito -Δ⟨C_q⟩_sb."""
        lifted = build_U2((0, 1), [[0, 1], [0, 2]], [[0, 3], [0, 1]], [Ladder(1024), Ladder(1024)])
        rho = random_density_matrix(4, np.random.default_rng(17))
        weights = [WeightState.gaussian(ladder, 32.0) for ladder in lifted.ladders]
        report = explicit_work(lifted, rho, weights)
        implicit = apply_unitary(rho, lifted.base)
        expected = -(lifted.charge_eigvals @ (np.diag(implicit.entries).real - np.diag(rho.entries).real))
        assert np.max(np.abs(expected)) > 1e-3
        assert np.max(np.abs(report.work - expected)) <= 1e-3

    def test_build_U1_conserva_la_entropia(self):
        """Con pesos estrechos en momento la rotación deja S_sb casi intacta."""
        hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        rho = random_density_matrix(4, np.random.default_rng(18))
        lifted = build_U1(hadamard, [[0, 1]], [Ladder(1 << 16)], bath_charges=[[0, 2]])
        narrow = [WeightState.gaussian(lifted.ladders[0], 2048.0)]
        dS = von_neumann_entropy(evolve_reduced(lifted, rho, narrow)) - von_neumann_entropy(rho)
        assert abs(dS) <= 1e-6
        wide = [WeightState.gaussian(lifted.ladders[0], 2.0)]
        assert von_neumann_entropy(evolve_reduced(lifted, rho, wide)) - von_neumann_entropy(rho) > 1e-6

    def test_niveles_invalidos(self):
        with pytest.raises(ArgumentError):
            build_U2((1, 1), [[0, 1]], [[0, 1]], [Ladder(16)])


class TestEvolucion:
    """Tests de la evolución reducida con pesos explícitos."""

    def test_gap_decrece_con_el_ancho(self, qutrit_charges):
        U, rho, ladders, lifted = _setup(qutrit_charges, 1024, seed=7)
        gaps = []
        for width in (8, 16, 32):
            weights = [WeightState.gaussian(ladder, width) for ladder in ladders]
            gaps.append(implicit_explicit_gap(rho, weights, U, lifted))
        assert gaps[0] > gaps[1] > gaps[2] > 0

    def test_onda_plana(self, qutrit_charges):
        """Con momento bien definido la evolución implícita es exacta."""
        U, rho, ladders, lifted = _setup(qutrit_charges, 64, seed=8)
        weights = [WeightState.plane_wave(ladder) for ladder in ladders]
        assert implicit_explicit_gap(rho, weights, U, lifted) <= 1e-10
        assert abs(entropy_nondecrease_check(lifted, rho, weights).dS_sb) <= 1e-8

    @pytest.mark.parametrize('seed', range(200))
    def test_entropia_no_decrece(self, qutrit_charges, seed):
        _, rho, ladders, lifted = _setup(qutrit_charges, 64, seed)
        weights = [WeightState.gaussian(ladder, 2.0) for ladder in ladders]
        check = entropy_nondecrease_check(lifted, rho, weights)
        assert check.dS_sb >= -1e-10
        assert check.mixture_error <= 1e-8
        assert check.ok

    def test_momento_conservado(self, qutrit_charges):
        _, rho, ladders, lifted = _setup(qutrit_charges, 256, seed=10)
        weights = [WeightState.gaussian(ladder, 6.0, momentum=0.4) for ladder in ladders]
        for q in range(2):
            drift = evolved_momentum_distribution(lifted, rho, weights, q) - momentum_distribution(weights[q])
            assert np.max(np.abs(drift)) <= 1e-8

    def test_banda_de_guarda_en_la_evolucion(self, qutrit_charges):
        _, rho, ladders, lifted = _setup(qutrit_charges, 64, seed=11)
        weights = [WeightState.gaussian(ladder, 10.0) for ladder in ladders]
        with pytest.raises(GuardBandError):
            evolve_reduced(lifted, rho, weights)

    def test_escalera_sin_sitio_para_la_banda(self, qutrit_charges):
        _, rho, ladders, lifted = _setup(qutrit_charges, 8, seed=12)
        weights = [WeightState.gaussian(ladder, 0.5) for ladder in ladders]
        with pytest.raises(GuardBandError):
            evolve_reduced(lifted, rho, weights)

    def test_dimension_incorrecta(self, qutrit_charges):
        _, _, ladders, lifted = _setup(qutrit_charges, 64, seed=13)
        weights = [WeightState.gaussian(ladder, 2.0) for ladder in ladders]
        with pytest.raises(DimensionError):
            evolve_reduced(lifted, DensityMatrix.maximally_mixed(2), weights)


class TestTrabajoExplicito:
    """Tests de explicit_work."""

    def test_primera_ley(self, qutrit_charges):
        """ΔW_q + Δ⟨C_q⟩_sb = 0 con conservación estricta."""
        _, rho, ladders, lifted = _setup(qutrit_charges, 256, seed=14)
        weights = [WeightState.gaussian(ladder, 8.0) for ladder in ladders]
        report = explicit_work(lifted, rho, weights)
        assert report.mode == 'strict'
        assert np.max(np.abs(report.first_law_residual)) <= 1e-9
        assert np.any(np.abs(report.work) > 1e-6)

    def test_modo_promedio(self, pauli_qubit):
        rng = np.random.default_rng(15)
        U = haar_unitary(2, rng)
        rho = random_density_matrix(2, rng)
        lifted = lift_unitary(U, None, [Ladder(16), Ladder(16)], mode='average')
        assert lifted.commutator_norms() == {}
        report = explicit_work(lifted, rho, [], charges=pauli_qubit)
        assert report.mode == 'average'
        assert np.allclose(report.work, -report.charge_change)
        with pytest.raises(ArgumentError):
            explicit_work(lifted, rho, [])
        with pytest.raises(PreconditionError):
            entropy_nondecrease_check(lifted, rho, [])

    def test_modo_desconocido(self, qutrit_charges):
        with pytest.raises(ArgumentError):
            lift_unitary(np.eye(3), charge_eigenvalues(qutrit_charges), [Ladder(16)] * 2, mode='loose')


@pytest.fixture(scope='class')
def thermal_bath_setup(commuting_qubit):
    """Qubit A = diag(0,1), B = diag(0,2) junto a un baño térmico de un qubit con β = (1, 1/2)."""
    bath = ChargeSet((np.diag([0.0, 1.0]), np.diag([0.0, 1.0])), names=('A', 'B'))
    betas = (1.0, 0.5)
    rng = np.random.default_rng(21)
    rho_s = random_density_matrix(2, rng)
    rho_sb = DensityMatrix(np.kron(rho_s.entries, gibbs_state(bath, betas).state.entries))
    joint = charge_eigenvalues(commuting_qubit)[:, :, None] + charge_eigenvalues(bath)[:, None, :]
    lifted = lift_unitary(haar_unitary(4, rng), joint.reshape(2, -1), [Ladder(1024), Ladder(1024)])
    return lifted, rho_sb, betas


class TestSegundaLeyExplicita:
    """Tests de Σβ_qΔW_q <= -ΔF̃_s con pesos explícitos."""

    def test_holgura_por_anchos(self, thermal_bath_setup, commuting_qubit):
        """La violación queda bajo la tolerancia y la tolerancia baja con el ancho."""
        lifted, rho_sb, betas = thermal_bath_setup
        tols = []
        for width in (8, 16, 32):
            weights = [WeightState.gaussian(ladder, float(width)) for ladder in lifted.ladders]
            report = explicit_work(lifted, rho_sb, weights, betas=betas, system=commuting_qubit)
            assert report.second_law_slack >= -report.second_law_tol
            assert report.second_law_slack == pytest.approx(-report.dF_s - np.dot(betas, report.work), abs=1e-12)
            assert report.checks == {'first_law': True, 'second_law': True}
            tols.append(report.second_law_tol)
        assert tols[0] > tols[1] > tols[2] > 0

    def test_sistema_por_omision(self, qutrit_charges):
        """Sin ``system`` el sistema es s⊗b entero y la cota es -ΔF̃_sb."""
        _, rho, ladders, lifted = _setup(qutrit_charges, 256, seed=22)
        weights = [WeightState.gaussian(ladder, 8.0) for ladder in ladders]
        report = explicit_work(lifted, rho, weights, charges=qutrit_charges, betas=(1.0, -0.5))
        assert report.checks['second_law']
        assert np.isfinite(report.dF_s)

    def test_sin_betas(self, qutrit_charges):
        _, rho, ladders, lifted = _setup(qutrit_charges, 256, seed=23)
        weights = [WeightState.gaussian(ladder, 8.0) for ladder in ladders]
        report = explicit_work(lifted, rho, weights)
        assert report.checks == {'first_law': True}
        assert np.isnan(report.second_law_slack)

    def test_errores(self, thermal_bath_setup, commuting_qubit, qutrit_charges):
        lifted, rho_sb, betas = thermal_bath_setup
        weights = [WeightState.gaussian(ladder, 8.0) for ladder in lifted.ladders]
        with pytest.raises(ArgumentError):
            explicit_work(lifted, rho_sb, weights, betas=betas)
        with pytest.raises(DimensionError):
            explicit_work(lifted, rho_sb, weights, betas=(1.0,), system=commuting_qubit)
        with pytest.raises(DimensionError):
            explicit_work(lifted, rho_sb, weights, betas=betas, system=qutrit_charges)
        with pytest.raises(DimensionError):
            second_law_tolerance(lifted, (1.0,), [0.0, 0.0], 0.1)
        with pytest.raises(ArgumentError):
            second_law_tolerance(lifted, betas, [0.0, 0.0], -0.1)
