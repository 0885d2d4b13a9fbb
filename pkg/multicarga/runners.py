# runners.py - Un experimento por tipo: de ExperimentConfig a RunReport
"""
Cada ``run_<tipo>`` recibe una configuración validada, llama a los módulos de
cálculo y devuelve un RunReport con columnas etiquetadas con sus unidades
('adim' para cantidades adimensionales, el nombre de la carga para cargas y
'1' para conteos y probabilidades). Los barridos repiten un experimento sobre
una rejilla de hasta dos parámetros y agregan una fila por punto.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .bathtrade import plan_trade, xy
from .battery import (
    Ladder,
    WeightState,
    charge_eigenvalues,
    entropy_nondecrease_check,
    evolved_momentum_distribution,
    explicit_work,
    implicit_explicit_gap,
    lift_unitary,
    momentum_distribution,
)
from .constants import COMMUTATOR_TOL, SECOND_LAW_TOL
from .extract import SystemSpec, convert_work, run_extraction, second_law_audit
from .gge import (
    charge_averages,
    eigenstate_charges,
    free_entropy,
    gibbs_state,
    solve_betas,
    verify_minimality,
)
from .numtheory import RespecifyRequired, bezout, farey_sequence, robust_select, verify_coverage
from .qcore import haar_unitary, random_density_matrix, von_neumann_entropy
from .reports import RunReport

logger = logging.getLogger(__name__)

DEFAULT_LADDER_SIZE = 1024
MOMENTUM_TOL = 1e-8


def _floats(values) -> list:
    return [float(v) for v in values]


# ==================== ESTADOS TÉRMICOS ====================

def run_thermal(config) -> RunReport:
    charges, betas = config.charges, _floats(config.betas)
    tau = gibbs_state(charges, betas)
    levels = eigenstate_charges(charges, betas)
    report = RunReport(
        kind='thermal', inputs=config.resolved,
        columns=[('level', '1'), ('eigenvalue', 'adim'), ('population', '1')]
                + [(f'avg_{name}', name) for name in charges.names],
        steps=[[i, e.eigenvalue, e.population] + _floats(e.averages) for i, e in enumerate(levels)],
        totals={
            'log_partition': tau.log_partition,
            'free_entropy': free_entropy(tau.state, charges, betas),
            'entropy': von_neumann_entropy(tau.state),
            'averages': dict(zip(charges.names, _floats(charge_averages(tau.state, charges)))),
            'reconstruction_error': tau.reconstruction_error(),
        },
    )
    trials = config.protocol.get('trials')
    if trials:
        minimality = verify_minimality(charges, betas, trials, seed=config.seed or 0)
        report.checks['minimality'] = {
            'ok': minimality.ok, 'min_gap': minimality.min_gap, 'violations': len(minimality.violations),
        }
        report.ok = minimality.ok
    return report


def run_solve_betas(config) -> RunReport:
    charges = config.charges
    targets = _floats(config.targets)
    tol = float(config.protocol.get('tol', 1e-10))
    betas = solve_betas(charges, targets, tol=tol)
    achieved = charge_averages(gibbs_state(charges, betas).state, charges)
    residual = float(np.max(np.abs(achieved - np.array(targets))))
    return RunReport(
        kind='solve-betas', inputs=config.resolved,
        columns=[('charge', '-'), ('target', 'carga'), ('beta', '1/carga'), ('achieved', 'carga')],
        steps=[[name, t, b, a] for name, t, b, a in zip(charges.names, targets, _floats(betas.betas), _floats(achieved))],
        totals={'betas': _floats(betas.betas), 'residual': residual},
        checks={'residual_within_tol': residual <= tol},
        ok=residual <= tol,
    )


# ==================== INTERCAMBIO Y EXTRACCIÓN ====================

def run_trade(config) -> RunReport:
    spec = config.bath
    protocol = config.protocol
    kwargs = {'charge': protocol.get('charge', 'A')}
    if 'max_dn1' in protocol:
        kwargs['max_dn1'] = protocol['max_dn1']
    plan = plan_trade(spec, protocol['eta'], protocol['eps'], **kwargs)
    x, y = xy(spec)
    # con y = 0 el plan trabaja con los niveles 1 y 2 intercambiados
    bound = y if y != 0 else x
    bounded = all(step.within_bound(bound) and step.dF_b > 0 for step in plan.steps)
    reached = abs(plan.total_target) >= abs(float(protocol['eta'])) * (1 - 1e-12)
    within_budget = plan.total_dF <= float(protocol['eps']) * (1 + 1e-12)
    return RunReport(
        kind='trade', inputs=config.resolved,
        columns=[('dn1', '1'), ('dn2', '1'), ('delta_q', '1'), ('log_abs_delta_q', 'adim'),
                 ('dA_b', 'A'), ('dB_b', 'B'), ('dF_b', 'adim'), ('repetitions', '1')],
        steps=[[s.dn1, s.dn2, s.delta_q, s.log_abs_delta_q, s.dA_b, s.dB_b, s.dF_b, s.repetitions]
               for s in plan.steps],
        totals={'charge': plan.charge, 'dA_b': plan.total_dA, 'dB_b': plan.total_dB, 'dF_b': plan.total_dF},
        checks={'step_bound': bounded, 'target_reached': reached, 'within_budget': within_budget},
        ok=bounded and reached and within_budget,
    )


def run_extract(config) -> RunReport:
    sys = SystemSpec(config.state, config.charges)
    target = gibbs_state(config.charges, _floats(config.betas))
    result = run_extraction(sys, config.bath, float(config.protocol['delta_p']), target)
    totals = {
        'W_A': result.W_A, 'W_B': result.W_B,
        'rotation_W_A': result.rotation_W_A, 'rotation_W_B': result.rotation_W_B,
        'dF_s': result.dF_s, 'bath_dF': result.bath_dF, 'deficit': result.deficit,
        'steps': result.step_count,
    }
    into = config.protocol.get('convert_into')
    if into:
        converted = convert_work(result, config.bath, into=into, budget_dF=float(config.protocol.get('budget', 1e-3)))
        totals['converted'] = {
            'into': into, 'W_A': converted.W_A, 'W_B': converted.W_B,
            'trade_dF': converted.trade_dF, 'deficit': converted.deficit,
        }
    ok = result.deficit >= -SECOND_LAW_TOL
    return RunReport(
        kind='extract', inputs=config.resolved,
        columns=[('step', '1'), ('i', '1'), ('j', '1'), ('dn1', '1'), ('dn2', '1'), ('delta_p', '1'),
                 ('dA_s', 'A'), ('dB_s', 'B'), ('dA_b', 'A'), ('dB_b', 'B'),
                 ('dW_A', 'A'), ('dW_B', 'B'), ('dS_s', 'adim'), ('dS_b', 'adim'), ('dF_b', 'adim')],
        steps=[[n, s.levels[0], s.levels[1], s.dn1, s.dn2, s.delta_p, s.dA_s, s.dB_s, s.dA_b, s.dB_b,
                s.dW_A, s.dW_B, s.dS_s, s.dS_b, s.dF_b] for n, s in enumerate(result.steps)],
        totals=totals,
        checks={'second_law': ok},
        ok=ok,
    )


def run_audit(config) -> RunReport:
    sys = None
    if config.state is not None and config.charges is not None:
        sys = SystemSpec(config.state, config.charges)
    audit = second_law_audit(sys, config.bath, config.protocol['trials'], seed=config.seed)
    return RunReport(
        kind='audit', inputs=config.resolved,
        columns=[('trial', '1'), ('check', '-'), ('value', 'adim')],
        steps=[[label, check, value] for label, check, value in audit.violations],
        totals={
            'trials': audit.trials, 'max_slack': audit.max_slack,
            'min_entropy_sum': audit.min_entropy_sum, 'min_bath_dF': audit.min_bath_dF,
            'violations': len(audit.violations),
        },
        checks={'second_law_audit': audit.ok},
        ok=audit.ok,
    )


# ==================== BATERÍAS ====================

def run_battery(config) -> RunReport:
    """Eleva un unitario de Haar (con semilla) y recorre los anchos del peso."""
    charges = config.charges
    protocol = config.protocol
    mode = protocol.get('mode', 'strict')
    rng = np.random.default_rng(config.seed)
    U = haar_unitary(charges.dim, rng)
    rho = config.state if config.state is not None else random_density_matrix(charges.dim, rng)

    size = protocol.get('ladder_size', DEFAULT_LADDER_SIZE)
    spacing = float(protocol.get('spacing', 1))
    ladders = [Ladder(size, spacing=spacing) for _ in range(charges.k)]
    lifted = lift_unitary(U, charge_eigenvalues(charges, mode), ladders, mode=mode)
    norms = lifted.commutator_norms()
    commuting = all(value <= COMMUTATOR_TOL for value in norms.values())

    widths = protocol['width']
    widths = widths if isinstance(widths, tuple) else (widths,)
    momentum = float(protocol.get('momentum', 0))
    # con betas, s⊗b entero hace de sistema frente a Σβ_qΔW_q <= -ΔF̃_sb
    betas = _floats(config.betas) if config.betas else None
    rows, gaps = [], []
    entropy_ok = momentum_ok = second_law_ok = True
    for width in widths:
        weights = [WeightState.gaussian(ladder, float(width), momentum=momentum) for ladder in ladders]
        gap = implicit_explicit_gap(rho, weights, U, lifted)
        work = explicit_work(lifted, rho, weights, charges=charges, betas=betas)
        row = [float(width), gap]
        if mode == 'strict':
            entropy = entropy_nondecrease_check(lifted, rho, weights)
            drift = max(
                float(np.max(np.abs(evolved_momentum_distribution(lifted, rho, weights, q)
                                    - momentum_distribution(weights[q]))))
                for q in range(len(weights))
            )
            entropy_ok &= entropy.ok
            momentum_ok &= drift <= MOMENTUM_TOL
            row += [entropy.dS_sb, entropy.mixture_error, drift]
        else:
            row += [math.nan, math.nan, math.nan]
        row += _floats(work.work) + [float(np.max(np.abs(work.first_law_residual), initial=0.0))]
        if betas is not None:
            row += [work.second_law_slack, work.second_law_tol]
            second_law_ok &= work.checks['second_law']
        rows.append(row)
        gaps.append(gap)

    decreasing = all(later < earlier for earlier, later in zip(gaps, gaps[1:]))
    checks = {'commutators': commuting, 'entropy_nondecrease': entropy_ok, 'momentum_preserved': momentum_ok}
    if betas is not None:
        checks['second_law'] = second_law_ok
    if len(gaps) > 1:
        checks['gap_decreasing'] = decreasing
    return RunReport(
        kind='battery', inputs=config.resolved,
        columns=[('width', 'peldaños'), ('gap', '1'), ('dS_sb', 'adim'), ('mixture_error', '1'),
                 ('momentum_drift', '1')]
                + [(f'W_{name}', name) for name in charges.names] + [('first_law_residual', 'carga')]
                + ([('second_law_slack', 'adim'), ('second_law_tol', 'adim')] if betas is not None else []),
        steps=rows,
        totals={'mode': mode, 'commutator_norms': norms, 'gap': gaps[-1], 'gaps': gaps},
        checks=checks,
        ok=all(checks.values()),
    )


# ==================== FAREY ====================

def run_farey(config) -> RunReport:
    p = config.protocol
    operation = p['operation']
    report = RunReport(kind='farey', inputs=config.resolved)

    if operation == 'sequence':
        sequence = farey_sequence(p['order'])
        report.columns = [('index', '1'), ('numerator', '1'), ('denominator', '1'), ('value', '1')]
        report.steps = [[i, f.numerator, f.denominator, float(f)] for i, f in enumerate(sequence)]
        report.totals = {'order': sequence.order, 'length': len(sequence)}
    elif operation == 'bezout':
        dn1, dn2 = bezout(p['u'], p['v'])
        report.columns = [('u', '1'), ('v', '1'), ('dn1', '1'), ('dn2', '1')]
        report.steps = [[p['u'], p['v'], dn1, dn2]]
        report.totals = {'dn1': dn1, 'dn2': dn2}
        report.checks = {'identity': p['u'] * dn1 + p['v'] * dn2 == 1}
    elif operation == 'robust-select':
        choice = robust_select(p['measured'], p['delta'], p['eps'], p['y'])
        report.columns = [('dn1', '1'), ('dn2', '1'), ('center', '1'), ('lower', '1'), ('upper', '1')]
        if isinstance(choice, RespecifyRequired):
            report.totals = {'respecify': choice.reason, 'max_delta': choice.max_delta,
                             'order': choice.order, 'center': choice.center}
            report.ok, report.exit_code = False, 3
        else:
            report.steps = [[choice.dn1, choice.dn2, choice.center, choice.interval.lower, choice.interval.upper]]
            report.totals = {'dn1': choice.dn1, 'dn2': choice.dn2, 'order': choice.order, 'center': choice.center}
    else:
        coverage = verify_coverage(p['order'], p['eps'], p['y'])
        report.columns = [('kind', '-'), ('left', '1'), ('right', '1')]
        report.steps = [list(v) for v in coverage.violations]
        report.totals = {'order': coverage.order, 'pairs_checked': coverage.pairs_checked,
                         'min_margin': coverage.min_margin}
        report.checks = {'coverage': coverage.ok}

    if report.checks and not all(report.checks.values()):
        report.ok = False
    return report


RUNNERS = {
    'thermal': run_thermal,
    'solve-betas': run_solve_betas,
    'trade': run_trade,
    'extract': run_extract,
    'battery': run_battery,
    'farey': run_farey,
    'audit': run_audit,
}


def run_experiment(config) -> RunReport:
    report = RUNNERS[config.kind](config)
    if not report.ok and report.exit_code == 0:
        report.exit_code = 2
    return report


# ==================== BARRIDOS ====================

SWEEP_METRICS = {
    'thermal': [('free_entropy', 'adim'), ('log_partition', 'adim')],
    'solve-betas': [('residual', 'carga')],
    'trade': [('dA_b', 'A'), ('dB_b', 'B'), ('dF_b', 'adim')],
    'extract': [('deficit', 'adim'), ('bath_dF', 'adim'), ('W_A', 'A'), ('W_B', 'B')],
    'battery': [('gap', '1')],
    'farey': [('dn1', '1'), ('dn2', '1')],
    'audit': [('max_slack', 'adim'), ('violations', '1')],
}


def sweep_points(grid: dict) -> list:
    """Producto cartesiano en el orden de las claves; una lista vacía da una rejilla vacía."""
    keys = list(grid)
    if not keys:
        return []
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


def run_sweep(config, jobs: int = 1) -> RunReport:
    """Una fila por punto de la rejilla; los puntos pueden calcularse en paralelo."""
    grid = config.sweep
    metrics = SWEEP_METRICS[config.kind]
    points = sweep_points(grid)

    def evaluate(point):
        return run_experiment(config.with_protocol(**point))

    if jobs > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(evaluate, points))
    else:
        results = [evaluate(point) for point in points]

    rows = [
        [point[key] for key in grid] + [result.totals.get(name, math.nan) for name, _ in metrics] + [result.ok]
        for point, result in zip(points, results)
    ]
    ok = all(result.ok for result in results)
    logger.info("✅ Barrido %s: %d puntos", config.kind, len(points))
    return RunReport(
        kind=f'sweep_{config.kind}', inputs=config.resolved,
        columns=[(key, 'param') for key in grid] + metrics + [('ok', 'bool')],
        steps=rows,
        totals={'points': len(points)},
        checks={'all_points_ok': ok},
        ok=ok,
        exit_code=0 if ok else 2,
    )
