"""
Tests para Bézout, Farey y la selección robusta.
"""
import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from multicarga.errors import ArgumentError
from multicarga.numtheory import (
    Interval,
    RespecifyRequired,
    RobustChoice,
    bezout,
    detect_rational,
    farey_interval,
    farey_sequence,
    float_to_rational,
    nearest_farey,
    parse_rational,
    robust_select,
    verify_coverage,
)


class TestBezout:
    """Tests de bezout."""

    def test_ejemplo(self):
        assert bezout(3, 5) == (2, -1)

    @pytest.mark.parametrize('n', [2, 3, 7, 100])
    def test_uno_y_n(self, n):
        assert bezout(1, n) == (1, 0)

    def test_uno_uno(self):
        assert bezout(1, 1) == (0, 1)

    def test_no_coprimos(self):
        with pytest.raises(ArgumentError):
            bezout(4, 6)

    def test_no_positivos(self):
        with pytest.raises(ArgumentError):
            bezout(0, 5)

    @given(st.integers(min_value=1, max_value=10**6), st.integers(min_value=1, max_value=10**6))
    @settings(max_examples=10**4, deadline=None)
    def test_identidad(self, u, v):
        """u·Δn₁ + v·Δn₂ = 1 con |Δn₁| < v y |Δn₂| < u (salvo u = v = 1)."""
        assume(math.gcd(u, v) == 1)
        dn1, dn2 = bezout(u, v)
        assert u * dn1 + v * dn2 == 1
        if (u, v) != (1, 1):
            assert abs(dn1) < v
            assert abs(dn2) <= u


class TestFarey:
    """Tests de farey_sequence y nearest_farey."""

    def test_orden_uno(self):
        assert list(farey_sequence(1)) == [Fraction(0), Fraction(1)]

    def test_orden_cinco(self):
        expected = [Fraction(0), Fraction(1, 5), Fraction(1, 4), Fraction(1, 3), Fraction(2, 5), Fraction(1, 2),
                    Fraction(3, 5), Fraction(2, 3), Fraction(3, 4), Fraction(4, 5), Fraction(1)]
        assert list(farey_sequence(5)) == expected

    def test_orden_invalido(self):
        with pytest.raises(ArgumentError):
            farey_sequence(0)

    @pytest.mark.parametrize('order', [1, 2, 7, 13, 40])
    def test_vecinos_determinante(self, order):
        for (a, b), (c, d) in ((x.as_integer_ratio(), y.as_integer_ratio())
                               for x, y in farey_sequence(order).neighbors()):
            assert c * b - a * d == 1

    def test_mas_cercano(self):
        assert nearest_farey(Fraction(7, 10), 5) == Fraction(2, 3)
        assert nearest_farey(Fraction(2, 5), 5) == Fraction(2, 5)
        assert nearest_farey(Fraction(1, 2) + Fraction(1, 10**9), 5) == Fraction(1, 2)

    def test_empate_denominador_menor(self):
        """1/4 equidista de 0/1 y 1/2 en F_2: gana 0/1."""
        assert nearest_farey(Fraction(1, 4), 2) == Fraction(0)

    def test_fuera_de_rango(self):
        with pytest.raises(ArgumentError):
            nearest_farey(Fraction(3, 2), 5)

    @given(st.fractions(min_value=0, max_value=1, max_denominator=10**6), st.integers(min_value=1, max_value=60))
    @settings(max_examples=300, deadline=None)
    def test_mas_cercano_fuerza_bruta(self, target, order):
        best = min(farey_sequence(order), key=lambda f: (abs(f - target), f.denominator))
        assert nearest_farey(target, order) == best


class TestIntervalos:
    """Tests de farey_interval y verify_coverage."""

    def test_intervalo(self):
        interval = farey_interval(Fraction(1, 2), Fraction(1, 10), 1)
        assert interval.lower == Fraction(9, 20)
        assert interval.upper == Fraction(11, 20)
        assert not interval.contains(Fraction(1, 2))
        assert interval.contains(Fraction(23, 50))

    def test_semiancho_positivo(self):
        with pytest.raises(ArgumentError):
            Interval(Fraction(1, 2), Fraction(0))

    def test_cobertura_orden_cinco(self):
        report = verify_coverage(5, Fraction(1, 5), 1)
        assert report.ok
        assert report.pairs_checked == 10
        assert report.min_margin > 0

    def test_orden_no_coincide(self):
        with pytest.raises(ArgumentError):
            verify_coverage(4, Fraction(1, 5), 1)

    def test_cobertura_exhaustiva(self):
        """Todos los órdenes n <= 200 con ε = |y|/n."""
        for order in range(1, 201):
            for y in (Fraction(1), Fraction(3, 2), Fraction(-7, 3)):
                report = verify_coverage(order, abs(y) / order, y)
                assert report.ok, (order, y, report.violations[:3])

    @given(st.integers(min_value=1, max_value=200),
           st.fractions(min_value=Fraction(1, 100), max_value=10, max_denominator=1000))
    @settings(max_examples=100, deadline=None)
    def test_cobertura_aleatoria(self, order, y):
        """ε dentro del rango que da el mismo orden."""
        eps = abs(y) / (order + Fraction(1, 2))
        assert math.floor(abs(y) / eps) == order
        assert verify_coverage(order, eps, y).ok


class TestSeleccionRobusta:
    """Tests de robust_select."""

    def test_ejemplo(self):
        """0.7 con δ = 1e-3, ε = 0.3, y = 1: centro 2/3 de orden 3."""
        choice = robust_select('0.7', '0.001', '0.3', 1)
        assert isinstance(choice, RobustChoice)
        assert choice.order == 3
        assert choice.center == Fraction(2, 3)
        assert (choice.dn1, choice.dn2) == (3, -2)
        assert abs(Fraction(7, 10) * choice.dn1 + choice.dn2) == Fraction(1, 10)

    def test_centro_excluido(self):
        result = robust_select(Fraction(2, 3), 0, '0.3', 1)
        assert isinstance(result, RespecifyRequired)
        assert result.max_delta == 0

    def test_delta_grande(self):
        result = robust_select('0.7', '0.2', '0.3', 1)
        assert isinstance(result, RespecifyRequired)
        assert 0 < result.max_delta < Fraction(2, 10)

    def test_parte_entera(self):
        """Con medida 2.7 el par incorpora k = 2: Δn₂ = -(u + k·v)."""
        choice = robust_select('2.7', '0.001', '0.3', 1)
        assert (choice.dn1, choice.dn2) == (3, -8)

    @given(st.fractions(min_value=0, max_value=5, max_denominator=10**4),
           st.fractions(min_value=Fraction(1, 10**6), max_value=Fraction(1, 20), max_denominator=10**6),
           st.fractions(min_value=Fraction(1, 1000), max_value=Fraction(1, 2), max_denominator=1000),
           st.fractions(min_value=Fraction(1, 10), max_value=3, max_denominator=100),
           st.floats(min_value=-1, max_value=1))
    @settings(max_examples=1000, deadline=None)
    def test_solidez(self, measured, delta, eps, y, offset):
        """Si hay elección, |x·Δn₁ + y·Δn₂| < ε para todo x/y a distancia <= δ."""
        result = robust_select(measured, delta, eps, y)
        if isinstance(result, RespecifyRequired):
            return
        true_ratio = measured + delta * Fraction(offset)
        x = true_ratio * y
        assert abs(x * result.dn1 + y * result.dn2) < eps

    def test_argumentos_invalidos(self):
        with pytest.raises(ArgumentError):
            robust_select('0.7', '0.001', '0.3', 0)


class TestRacionales:
    """Tests de parse_rational, float_to_rational y detect_rational."""

    def test_parse(self):
        assert parse_rational('0.7') == Fraction(7, 10)
        assert parse_rational('1e-3') == Fraction(1, 1000)
        assert parse_rational('2/3') == Fraction(2, 3)

    def test_parse_invalido(self):
        with pytest.raises(ArgumentError):
            parse_rational('siete')

    def test_aproximaciones(self):
        assert float_to_rational(0.5, 10) == Fraction(1, 2)
        assert float_to_rational(math.pi, 120) == Fraction(355, 113)
        assert float_to_rational(0.25, 4) == Fraction(1, 4)

    def test_no_finito(self):
        with pytest.raises(ArgumentError):
            float_to_rational(math.inf, 10)

    def test_detectar(self):
        assert detect_rational(2 / 3, 10**4, 1e-12) == Fraction(2, 3)
        assert detect_rational(math.sqrt(2), 10**4, 1e-12) is None
