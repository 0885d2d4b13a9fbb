"""
Tests para el intercambio de cargas con el baño.
"""
import itertools
import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from multicarga.bathtrade import (
    BathSpec,
    OccupationPair,
    choose_m,
    dense_oracle_trade,
    minimal_pair,
    plan_trade,
    trade_step,
    validate_bath,
    xy,
)
from multicarga.errors import ArgumentError, DimensionError, PreconditionError, ResourceError, RoleSwapRequired


def _oracle_fixtures():
    """Pares (n, n') de N <= 6 copias de un baño de 3 niveles con Δn pequeños."""
    fixtures = []
    for copies in range(2, 7):
        for n in itertools.product(range(copies + 1), repeat=3):
            if sum(n) != copies:
                continue
            for dn1, dn2 in ((1, 0), (0, 1), (1, -1), (-1, 1), (2, -1), (1, 1), (-1, -1)):
                n_prime = (n[0] - dn1 - dn2, n[1] + dn1, n[2] + dn2)
                if min(n_prime) >= 0:
                    fixtures.append((copies, n, n_prime))
    return fixtures[::5]


ORACLE_FIXTURES = _oracle_fixtures()


class TestBathSpec:
    """Tests de BathSpec y validate_bath."""

    def test_aceptado(self, accept_bath):
        validation = validate_bath(accept_bath)
        assert validation.accepted
        assert validation.x == pytest.approx(1.0)
        assert validation.y == pytest.approx(1.5)

    def test_relacion_afin(self):
        spec = BathSpec(level_charges=((0, 0), (1, 2), (2, 4)), betas=(1, 1))
        validation = validate_bath(spec)
        assert not validation.accepted
        assert 'affine' in validation.failures

    def test_conspiracion(self):
        spec = BathSpec(level_charges=((0, 0), (1, -1), (-1, 1)), betas=(1, 1))
        validation = validate_bath(spec)
        assert not validation.accepted
        assert 'no_conspiracy' in validation.failures

    def test_afin_con_flotantes(self):
        spec = BathSpec(level_charges=((0.0, 0.0), (0.1, 0.3), (0.2, 0.6)), betas=(1.0, 0.5))
        assert 'affine' in validate_bath(spec).failures

    def test_pocos_niveles(self):
        with pytest.raises(ArgumentError):
            BathSpec(level_charges=((0, 0), (1, 0)), betas=(1, 1))

    def test_poblaciones(self, accept_bath):
        z = 1 + math.exp(-1) + math.exp(-1.5)
        assert np.allclose(accept_bath.populations, [1 / z, math.exp(-1) / z, math.exp(-1.5) / z], atol=1e-15)
        assert accept_bath.exact


class TestChooseM:
    """Tests de choose_m."""

    def test_ejemplos(self):
        assert choose_m(Fraction(7, 10), 1, 10) == 6
        assert choose_m(1, 3, 3) == 0
        assert choose_m(-1, 4, 4) == -2

    def test_flotante_exacto(self):
        assert choose_m(0.7, 1.0, 10) == 6

    def test_cambio_de_signo(self):
        m = choose_m(Fraction(7, 10), 1, 10, sign_flip=True)
        assert m == 8
        assert Fraction(m - 1, 10) <= Fraction(7, 10) < Fraction(m, 10)

    def test_y_nula(self):
        with pytest.raises(RoleSwapRequired):
            choose_m(1, 0, 3)

    def test_dn1_invalido(self):
        with pytest.raises(ArgumentError):
            choose_m(1, 2, 0)


class TestTradeStep:
    """Tests de trade_step y del oráculo denso."""

    def test_par_identico(self, accept_bath):
        outcome = trade_step(accept_bath, OccupationPair((1, 1, 1), (1, 1, 1)))
        assert outcome.delta_q == 0.0
        assert (outcome.dA_b, outcome.dB_b, outcome.dF_b) == (0.0, 0.0, 0.0)

    def test_energia_libre(self, accept_bath):
        """ΔF̃_b = β_A ΔA_b + β_B ΔB_b = Δq·s."""
        outcome = trade_step(accept_bath, minimal_pair(3, 2, -1))
        assert outcome.dF_b == pytest.approx(outcome.dA_b + 1.5 * outcome.dB_b, rel=1e-12)
        assert outcome.gap == pytest.approx(0.5)

    def test_monotonia_en_n0(self, accept_bath):
        values = [trade_step(accept_bath, OccupationPair((n0, 1, 1), (n0 - 1, 2, 1))).log_abs_delta_q
                  for n0 in range(1, 12)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_oraculo_ejemplo(self, accept_bath):
        pair = OccupationPair((1, 1, 1), (0, 2, 1))
        dense = dense_oracle_trade(accept_bath, 3, pair)
        analytic = trade_step(accept_bath, pair)
        assert dense.delta_q == pytest.approx(analytic.delta_q, abs=1e-10)
        assert dense.dF_b == pytest.approx(analytic.dF_b, abs=1e-10)

    def test_oraculo_identidad(self, accept_bath):
        pair = OccupationPair((1, 1, 1), (1, 1, 1))
        dense = dense_oracle_trade(accept_bath, 3, pair)
        assert (dense.dA_b, dense.dB_b, dense.dF_b) == (0.0, 0.0, 0.0)

    @pytest.mark.parametrize('copies,n,n_prime', ORACLE_FIXTURES)
    def test_oraculo(self, accept_bath, copies, n, n_prime):
        """trade_step coincide con la simulación densa dentro de 1e-10."""
        pair = OccupationPair(n, n_prime)
        dense = dense_oracle_trade(accept_bath, copies, pair)
        analytic = trade_step(accept_bath, pair)
        assert abs(dense.delta_q - analytic.delta_q) <= 1e-10
        assert abs(dense.dA_b - analytic.dA_b) <= 1e-10
        assert abs(dense.dB_b - analytic.dB_b) <= 1e-10
        assert abs(dense.dF_b - analytic.dF_b) <= 1e-10

    def test_suficientes_fixtures(self):
        assert len(ORACLE_FIXTURES) >= 50

    def test_oraculo_demasiado_grande(self, accept_bath):
        pair = OccupationPair((8, 1, 1), (7, 2, 1))
        with pytest.raises(DimensionError):
            dense_oracle_trade(accept_bath, 10, pair)


class TestPlanTrade:
    """Tests de plan_trade."""

    def test_eta_nula(self, accept_bath):
        plan = plan_trade(accept_bath, 0, 1e-3)
        assert plan.steps == []
        assert plan.total_dF == 0.0

    @pytest.mark.parametrize('charge', ['A', 'B'])
    def test_plan(self, accept_bath, charge):
        """|ΔX_b| >= 1 con ΣΔF̃_b <= 1e-3 y 0 < ΔF̃_b <= yΔq en cada paso."""
        plan = plan_trade(accept_bath, 1.0, 1e-3, charge=charge)
        _, y = xy(accept_bath)
        assert plan.total_target >= 1.0
        assert 0 < plan.total_dF <= 1e-3
        assert plan.steps
        for step in plan.steps:
            assert step.within_bound(y)
            assert math.copysign(1, step.delta_q) == math.copysign(1, step.gap)
            assert math.isfinite(step.log_abs_delta_q)
            assert step.repetitions >= 1

    def test_eta_negativa(self, accept_bath):
        """ΔA_b < 0 exige la rama sign_flip: s en [-y, 0) y ΔF̃_b <= -yΔq."""
        plan = plan_trade(accept_bath, -0.5, 1e-3)
        _, y = xy(accept_bath)
        assert plan.total_dA <= -0.5
        assert plan.total_dF <= 1e-3
        for step in plan.steps:
            assert step.sign_flip
            assert -y <= step.gap < 0
            assert step.within_bound(y)

    def test_cota_con_signo(self, accept_bath):
        """Un Δq con el signo cambiado o la rama equivocada no cumple la cota."""
        _, y = xy(accept_bath)
        step = plan_trade(accept_bath, 1.0, 1e-3).steps[0]
        assert not step.sign_flip
        assert 0 < step.gap <= y
        assert step.within_bound(y)
        assert not replace(step, delta_q=-step.delta_q).within_bound(y)
        assert not replace(step, sign_flip=True).within_bound(y)
        assert not replace(step, gap=y * 1.5).within_bound(y)

    def test_cota_de_un_paso_suelto(self, accept_bath):
        """Δn₁ = 1, Δn₂ = 0: s = x = 1 <= y = 3/2 sin sign_flip."""
        step = trade_step(accept_bath, minimal_pair(3, 1, 0))
        assert step.within_bound(1.5)
        assert not step.within_bound(0.5)

    def test_limite_de_recursos(self, accept_bath):
        with pytest.raises(ResourceError) as info:
            plan_trade(accept_bath, 1.0, 1e-3, max_dn1=50)
        assert info.value.achieved['max_dn1'] == 50

    def test_bano_rechazado(self):
        spec = BathSpec(level_charges=((0, 0), (1, 2), (2, 4)), betas=(1, 1))
        with pytest.raises(PreconditionError):
            plan_trade(spec, 1.0, 1e-3)

    def test_y_nula_intercambia_niveles(self):
        """Con y = 0 se usan los niveles 1 y 2 intercambiados."""
        spec = BathSpec(level_charges=((0, 0), (1, 0), (1, -2)), betas=(1, Fraction(1, 2)))
        assert xy(spec)[1] == 0
        plan = plan_trade(spec, 1.0, 0.1)
        assert plan.total_target >= 1.0
        assert plan.total_dF <= 0.1
