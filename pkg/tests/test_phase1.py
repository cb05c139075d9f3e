import itertools
from pathlib import Path

import numpy as np
import pytest as pt

from chpplan.domain.timeseries import Scenario
from chpplan.domain.timeseries import ScenarioSet
from chpplan.domain.timeseries import TimeGrid
from chpplan.errors import DataError
from chpplan.errors import ModelError
from chpplan.errors import SolverError
from chpplan.milp.decoder import SolveStatus
from chpplan.milp.encoder import write_mps
from chpplan.milp.model import Model
from chpplan.milp.model import VarKind
from chpplan.milp.model import model_stats
from chpplan.milp.solver import Assignment
from chpplan.phase1 import PLAN_COLUMNS
from chpplan.phase1 import ContractModelIndex
from chpplan.phase1 import ContractPlan
from chpplan.phase1 import build_contract_model
from chpplan.phase1 import evaluate_plan
from chpplan.phase1 import extract_contract_plan
from chpplan.phase1 import fix_first_stage
from chpplan.phase1 import verify_plan_solution
from chpplan.synthetic import spike_contract
from chpplan.synthetic import spike_plan
from chpplan.synthetic import toy_plant

FIXTURES = Path(__file__).parent / 'milp' / 'fixtures'

HPW = 24
T = 4
NET_ELEC = np.full(T, 5.0)
AUX_COST = np.full(T, 40.0)
PSI = np.zeros(T)


def weekly_set(demands=((100, 150, 80, 120), (130, 90, 110, 140))) -> ScenarioSet:
    pi = 1.0 / len(demands)
    scenarios = tuple(
        Scenario(
            pi, np.array(d, float), np.full(T, 30.0), np.full(T, 30.0), label=f's{i}'
        )
        for i, d in enumerate(demands)
    )
    return ScenarioSet(TimeGrid.weekly(T, HPW), scenarios)


def small_contract(cid: str = 'S', **kwargs):
    settings = dict(
        freq=8, amount_max=60, deliveries_max=12, opt_up=0.5, opt_down=0.2, id=cid
    )
    return spike_contract(**{**settings, **kwargs})


def enumeration_contracts():
    return [
        small_contract('A', freq=24, deliveries_max=T),
        small_contract('B', freq=24, deliveries_max=T, base_price=45, amount_max=40),
    ]


def build(contracts=None, weekly=None, psi=PSI):
    contracts = contracts or [small_contract()]
    return build_contract_model(
        toy_plant(), contracts, weekly or weekly_set(), NET_ELEC, AUX_COST, psi
    )


def test_variable_count():
    model, index = build([small_contract('A'), small_contract('B')])
    # per contract 1 + 4T, per contract and scenario 2T, per scenario 8T + 1
    assert len(model.variables) == 2 * (1 + 4 * T) + 2 * 2 * 2 * T + 2 * (8 * T + 1)
    assert len(model.variables) == 132
    stats = model_stats(model)
    assert stats.binary == 2
    assert stats.integer == 2 * T
    assert index.contract_ids == ('A', 'B')
    assert index.probabilities == (0.5, 0.5)


def test_delivery_bounds_and_safety_floor():
    model, _ = build()
    d = model.var('d_jS_w3')
    assert d.kind is VarKind.INTEGER
    assert (d.lb, d.ub) == (0.0, 12.0)
    assert model.var('dlout_w1_s0').ub == HPW * 100
    assert model.var('p_w2_s1').ub == HPW * 10
    assert model.var('dl_w4_s1').lb == 0.0


def test_frequency_rows_follow_the_window():
    # one delivery per 24 h at 24 h per week: a single delivery a week
    model, _ = build([small_contract(freq=24)])
    row = next(c for c in model.constraints if c.name == 'freq_jS_w2')
    assert row.rhs == 1.0
    assert len(row.expr.terms) == 1
    # one delivery per 48 h: two-week windows
    model, _ = build([small_contract(freq=48)])
    row = next(c for c in model.constraints if c.name == 'freq_jS_w2')
    assert len(row.expr.terms) == 2


def test_delivery_gap_caps_weekly_slots():
    plant = toy_plant(
        biomass_storage={**toy_plant().biomass_storage.model_dump(), 'delivery_gap': 10}
    )
    model, _ = build_contract_model(
        plant, [small_contract()], weekly_set(), NET_ELEC, AUX_COST, PSI
    )
    row = next(c for c in model.constraints if c.name == 'slots_w1')
    assert row.rhs == 3.0


def test_incentive_lowers_option_prices():
    psi = np.array([0.0, 1.0, 2.0, 3.0])
    model, _ = build(psi=psi)
    up = model.var('bup_jS_w3').index
    down = model.var('bdn_jS_w4').index
    assert model.objective.terms[up] == pt.approx(20 - 2.0)
    assert model.objective.terms[down] == pt.approx(20 - 3.0)


def test_grid_checks():
    hourly = ScenarioSet(
        TimeGrid.hourly(1, HPW),
        (Scenario(1.0, np.ones(HPW), np.ones(HPW), np.ones(HPW)),),
    )
    with pt.raises(DataError, match='weekly grid'):
        build(weekly=hourly)
    with pt.raises(DataError, match='grid mismatch: psi'):
        build(psi=np.zeros(T + 1))


def test_fix_first_stage_pins_the_plan():
    model, _ = build()
    plan = spike_plan(T)
    fix_first_stage(model, plan)
    pinned = (('u_jS', 1), ('d_jS_w2', 1), ('b_jS_w2', 170), ('bup_jS_w4', 85))
    for name, value in pinned:
        v = model.var(name)
        assert v.lb == v.ub == value
    assert model.var('bdn_jS_w1').ub == 0.0


def test_plan_validation():
    contracts = [spike_contract()]
    spike_plan().validate(contracts, 24)

    ones = np.ones((1, 12))
    greedy = ContractPlan(('S',), [True], ones, 170 * ones, 100 * ones, 0 * ones)
    with pt.raises(ModelError, match='up-option above 0.5'):
        greedy.validate(contracts, 24)
    twice = ContractPlan(('S',), [True], 2 * ones, 170 * ones, 0 * ones, 0 * ones)
    with pt.raises(ModelError, match='more than 1 deliveries in 1 weeks'):
        twice.validate(contracts, 24)
    with pt.raises(ModelError, match='unknown contract'):
        ContractPlan.empty(['X'], 12).validate(contracts, 24)
    with pt.raises(ModelError, match='does not match'):
        ContractPlan(('S',), [True], ones, np.ones((1, 3)), ones, ones)


def test_empty_plan():
    plan = ContractPlan.empty(['1', '2'], 52)
    assert plan.n_weeks == 52
    assert not plan.has_options
    assert not plan.selected.any()
    with pt.raises(ValueError):
        plan.base[0, 0] = 1.0


def test_fixed_cost():
    plan = spike_plan()
    assert plan.fixed_cost([spike_contract()], 0) == pt.approx(50 * 170 + 20 * 85)


def test_plan_csv(tmp_path):
    path = tmp_path / 'plan.csv'
    plan = spike_plan(3)
    plan.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ','.join(PLAN_COLUMNS)
    assert lines[1] == 'S,1,1,170.000000,85.000000,0.000000'
    again = ContractPlan.read_csv(path)
    assert again.contract_ids == ('S',)
    assert np.array_equal(again.up, plan.up)

    (tmp_path / 'bad.csv').write_text('contract,week,U\nS,1,1\n')
    with pt.raises(DataError, match='expected columns'):
        ContractPlan.read_csv(tmp_path / 'bad.csv')
    with pt.raises(DataError, match='plan file not found'):
        ContractPlan.read_csv(tmp_path / 'missing.csv')


def fake_assignment(values, status=SolveStatus.OPTIMAL) -> Assignment:
    return Assignment(values, 0.0, status)


def test_extract_checks_the_solution():
    index = ContractModelIndex(Model(), ('S',), 2, 1, (1.0,))
    values = {'u_jS': 1.0, 'd_jS_w1': 1.0, 'b_jS_w1': 170.0, 'bup_jS_w1': 1e-9}
    plan = extract_contract_plan(index, fake_assignment(values))
    assert plan.deliveries.tolist() == [[1, 0]]
    assert plan.up[0, 0] == 0.0

    with pt.raises(ModelError, match='integrality violation: d_jS_w1'):
        extract_contract_plan(index, fake_assignment({**values, 'd_jS_w1': 0.5}))
    with pt.raises(ModelError, match='not selected'):
        extract_contract_plan(index, fake_assignment({**values, 'u_jS': 0.0}))
    with pt.raises(SolverError, match='infeasible'):
        extract_contract_plan(index, fake_assignment({}, SolveStatus.INFEASIBLE))


@pt.mark.solver
def test_solved_plan_is_consistent(solver):
    contracts = [small_contract()]
    weekly = weekly_set()
    model, index = build(contracts, weekly)
    result = solver.solve_optimal(model, 'contracts')
    assert result.check(model) == []
    assert verify_plan_solution(index, result, toy_plant(), weekly) == []
    plan = extract_contract_plan(index, result, contracts, HPW)
    cost = evaluate_plan(
        toy_plant(), contracts, plan, weekly, NET_ELEC, AUX_COST, PSI, solver
    )
    assert cost == pt.approx(result.objective, rel=1e-6)


@pt.mark.solver
def test_single_scenario_buys_no_options(solver):
    contracts = [small_contract()]
    weekly = weekly_set().expected()
    model, index = build(contracts, weekly)
    result = solver.solve_optimal(model, 'ev')
    plan = extract_contract_plan(index, result, contracts, HPW)
    assert plan.selected.all()
    assert not plan.has_options


@pt.mark.slow
@pt.mark.solver
def test_optimum_matches_enumeration(solver):
    # at most one delivery a week per contract: 2^8 first-stage assignments
    contracts = enumeration_contracts()
    model, _ = build(contracts)
    best = solver.solve_optimal(model, 'contracts').objective

    costs = []
    for flags in itertools.product((0, 1), repeat=2 * T):
        fixed, _ = build(contracts)
        for j, cid in enumerate('AB'):
            weeks = flags[j * T : (j + 1) * T]
            fixed.fix(fixed.var(f'u_j{cid}'), float(any(weeks)))
            for t, count in enumerate(weeks, start=1):
                fixed.fix(fixed.var(f'd_j{cid}_w{t}'), count)
        costs.append(solver.solve_optimal(fixed, f'deliveries {flags}').objective)
    assert len(costs) == 256
    assert best == pt.approx(min(costs), rel=1e-6, abs=1e-6)


@pt.mark.solver
def test_stochastic_plan_is_no_worse_than_the_expected_value_plan(solver):
    contracts = [small_contract()]
    weekly = weekly_set()
    model, index = build(contracts, weekly)
    stochastic = solver.solve_optimal(model, 'stochastic')
    ev_model, ev_index = build(contracts, weekly.expected())
    ev_plan = extract_contract_plan(ev_index, solver.solve_optimal(ev_model, 'ev'))
    ev_cost = evaluate_plan(
        toy_plant(), contracts, ev_plan, weekly, NET_ELEC, AUX_COST, PSI, solver
    )
    assert ev_cost - stochastic.objective >= -1e-6 * abs(stochastic.objective)


def test_contract_model_golden_file(tmp_path):
    model, _ = build(enumeration_contracts())
    written = write_mps(model, tmp_path / 'c.mps')
    golden = FIXTURES / 'contracts_enumeration.mps'
    assert written.read_bytes() == golden.read_bytes()
