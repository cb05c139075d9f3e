"""Contract selection: weekly two-stage stochastic MILP.

First stage, shared by all scenarios: contract selection u, weekly delivery
counts d and contracted base, up-option and down-option amounts. Second stage,
per demand scenario: option usage, biomass storage, CHP and auxiliary boiler
production at weekly resolution.

Variable names (weeks 1-based, scenarios 0-based):

    u_j{c}, d_j{c}_w{t}, b_j{c}_w{t}, bup_j{c}_w{t}, bdn_j{c}_w{t}
    bbarup_j{c}_w{t}_s{s}, bbardn_j{c}_w{t}_s{s}
    dl_w{t}_s{s}, dlin_w{t}_s{s}, dlout_w{t}_s{s}, dlend_s{s}
    p_w{t}_s{s}, qchp_w{t}_s{s}, qaux_w{t}_s{s}, qmiss_w{t}_s{s}, qbm_w{t}_s{s}
"""

import dataclasses as dtc
import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from chpplan import config
from chpplan.domain.params import ContractSpec
from chpplan.domain.params import PlantConfig
from chpplan.domain.timeseries import Resolution
from chpplan.domain.timeseries import ScenarioSet
from chpplan.errors import DataError
from chpplan.errors import ModelError
from chpplan.errors import SolverError
from chpplan.milp.model import LinExpr
from chpplan.milp.model import Model
from chpplan.milp.model import VarKind
from chpplan.milp.solver import Assignment

logger = logging.getLogger('phase1')

PLAN_COLUMNS = ['contract', 'week', 'U', 'B', 'B_up', 'B_down']


@dtc.dataclass(frozen=True)
class ContractPlan:
    """Per contract and week: delivery count and contracted amounts in tonnes."""

    contract_ids: tuple[str, ...]
    selected: np.ndarray
    deliveries: np.ndarray
    base: np.ndarray
    up: np.ndarray
    down: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'contract_ids', tuple(self.contract_ids))
        n = len(self.contract_ids)
        object.__setattr__(self, 'selected', np.asarray(self.selected, dtype=bool))
        object.__setattr__(self, 'deliveries', np.asarray(self.deliveries, dtype=int))
        for name in ('base', 'up', 'down'):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.selected.shape != (n,):
            raise ModelError(f'selected has shape {self.selected.shape}, want ({n},)')
        shape = self.deliveries.shape
        if len(shape) != 2 or shape[0] != n:
            raise ModelError(f'deliveries has shape {shape}, want ({n}, weeks)')
        for name in ('base', 'up', 'down'):
            if getattr(self, name).shape != shape:
                raise ModelError(f'{name} does not match the deliveries shape {shape}')
        for arr in (self.selected, self.deliveries, self.base, self.up, self.down):
            arr.flags.writeable = False

    @property
    def n_weeks(self) -> int:
        return self.deliveries.shape[1]

    @property
    def has_options(self) -> bool:
        return bool(np.any(self.up > 0) or np.any(self.down > 0))

    @classmethod
    def empty(cls, contract_ids: Sequence[str], n_weeks: int) -> 'ContractPlan':
        n = len(contract_ids)
        zeros = np.zeros((n, n_weeks))
        flags = np.zeros(n, bool)
        return cls(tuple(contract_ids), flags, zeros.astype(int), zeros, zeros, zeros)

    def position(self, contract_id: str) -> int:
        try:
            return self.contract_ids.index(contract_id)
        except ValueError:
            raise ModelError(f'contract {contract_id!r} not in plan') from None

    def fixed_cost(self, contracts: Sequence[ContractSpec], week: int) -> float:
        """Contracted cost of 0-based `week`, amounts at their prices."""
        specs = {c.id: c for c in contracts}
        total = 0.0
        for j, cid in enumerate(self.contract_ids):
            c = specs[cid]
            total += (
                c.base_price * self.base[j, week]
                + c.up_price * self.up[j, week]
                + c.down_price * self.down[j, week]
            )
        return total

    def validate(
        self,
        contracts: Sequence[ContractSpec],
        hours_per_week: int = config.HOURS_PER_WEEK,
        tol: float = config.FEAS_TOL,
    ) -> None:
        specs = {c.id: c for c in contracts}
        problems = []

        def near(a, b):
            return tol * max(1.0, abs(a), abs(b))

        for j, cid in enumerate(self.contract_ids):
            if cid not in specs:
                raise ModelError(f'plan names unknown contract {cid!r}')
            c = specs[cid]
            U, B, Bp, Bm = self.deliveries[j], self.base[j], self.up[j], self.down[j]
            if np.any(U < 0) or np.any(np.stack([B, Bp, Bm]) < -tol):
                problems.append(f'{cid}: negative entries')
            if not self.selected[j]:
                if np.any(U != 0) or np.any(np.abs(np.stack([B, Bp, Bm])) > tol):
                    problems.append(f'{cid}: unselected contract has deliveries')
                continue
            total = int(U.sum())
            if not c.deliveries_min <= total <= c.deliveries_max:
                problems.append(
                    f'{cid}: {total} deliveries outside '
                    f'[{c.deliveries_min}, {c.deliveries_max}]'
                )
            for w in range(self.n_weeks):
                if Bp[w] > c.opt_up * B[w] + near(Bp[w], B[w]):
                    problems.append(
                        f'{cid} week {w + 1}: up-option above {c.opt_up} * B'
                    )
                if Bm[w] > c.opt_down * B[w] + near(Bm[w], B[w]):
                    problems.append(
                        f'{cid} week {w + 1}: down-option above {c.opt_down} * B'
                    )
                cap = c.amount_max * U[w]
                if B[w] + Bp[w] > cap + near(B[w], cap):
                    problems.append(f'{cid} week {w + 1}: amount above {cap}')
                floor = c.amount_min * U[w]
                if B[w] - Bm[w] < floor - near(B[w], floor):
                    problems.append(f'{cid} week {w + 1}: amount below {floor}')
            window = c.window_weeks(hours_per_week)
            limit = c.deliveries_per_window(hours_per_week)
            for w in range(self.n_weeks):
                if U[max(0, w - window + 1) : w + 1].sum() > limit:
                    problems.append(
                        f'{cid} week {w + 1}: more than {limit} deliveries '
                        f'in {window} weeks'
                    )
        if problems:
            raise ModelError(
                'contract plan invariants violated: ' + '; '.join(problems)
            )

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for j, cid in enumerate(self.contract_ids):
            for w in range(self.n_weeks):
                rows.append(
                    (
                        cid,
                        w + 1,
                        int(self.deliveries[j, w]),
                        self.base[j, w],
                        self.up[j, w],
                        self.down[j, w],
                    )
                )
        return pd.DataFrame(rows, columns=PLAN_COLUMNS)

    def write_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(
            path, index=False, float_format='%.6f', lineterminator='\n'
        )

    @classmethod
    def read_csv(cls, path: str | Path) -> 'ContractPlan':
        try:
            frame = pd.read_csv(path, dtype={'contract': str})
        except FileNotFoundError:
            raise DataError('plan file not found', str(path)) from None
        if list(frame.columns) != PLAN_COLUMNS:
            raise DataError(f'expected columns {",".join(PLAN_COLUMNS)}', str(path))
        ids = tuple(dict.fromkeys(frame['contract']))
        n_weeks = int(frame['week'].max()) if len(frame) else 0
        shape = (len(ids), n_weeks)
        arrays = {k: np.zeros(shape) for k in ('U', 'B', 'B_up', 'B_down')}
        for row in frame.itertuples(index=False):
            j, w = ids.index(row.contract), int(row.week) - 1
            arrays['U'][j, w] = row.U
            arrays['B'][j, w] = row.B
            arrays['B_up'][j, w] = row.B_up
            arrays['B_down'][j, w] = row.B_down
        return cls(
            ids,
            arrays['U'].sum(axis=1) > 0,
            arrays['U'].round().astype(int),
            arrays['B'],
            arrays['B_up'],
            arrays['B_down'],
        )


@dtc.dataclass(frozen=True)
class ContractModelIndex:
    model: Model
    contract_ids: tuple[str, ...]
    n_weeks: int
    n_scenarios: int
    probabilities: tuple[float, ...]

    def weeks(self) -> range:
        return range(1, self.n_weeks + 1)

    def scenarios(self) -> range:
        return range(self.n_scenarios)


def _check_series(name: str, values, n_weeks: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (n_weeks,):
        raise DataError(
            f'grid mismatch: {name} has {arr.size} values for {n_weeks} weeks', name
        )
    return arr


def build_contract_model(
    plant: PlantConfig,
    contracts: Sequence[ContractSpec],
    weekly: ScenarioSet,
    net_elec_cost,
    aux_cost,
    psi,
) -> tuple[Model, ContractModelIndex]:
    """Deterministic equivalent of the contract selection problem.

    `net_elec_cost` and `aux_cost` are expected weekly (mean hourly) values
    of L and C^AUX; `psi` is the option incentive per week.
    """
    grid = weekly.grid
    if grid.resolution is not Resolution.WEEKLY:
        raise DataError('grid mismatch: contract model needs a weekly grid', 'grid')
    T, S, H = grid.n_periods, len(weekly), grid.hours_per_week
    net_elec_cost = _check_series('net_elec_cost', net_elec_cost, T)
    aux_cost = _check_series('aux_cost', aux_cost, T)
    psi = _check_series('psi', psi, T)

    chp, aux = plant.chp, plant.aux
    store, cost = plant.biomass_storage, plant.cost
    pi = weekly.probabilities
    demand = weekly.matrix('demand')

    m = Model('contracts')
    u, d, b, bup, bdn = {}, {}, {}, {}, {}
    for c in contracts:
        u[c.id] = m.add_var(f'u_j{c.id}', VarKind.BINARY)
        for t in range(1, T + 1):
            key = (c.id, t)
            d[key] = m.add_var(f'd_j{c.id}_w{t}', VarKind.INTEGER, 0, c.deliveries_max)
            b[key] = m.add_var(f'b_j{c.id}_w{t}')
            bup[key] = m.add_var(f'bup_j{c.id}_w{t}')
            bdn[key] = m.add_var(f'bdn_j{c.id}_w{t}')

    bbarup, bbardn = {}, {}
    for c in contracts:
        for t in range(1, T + 1):
            for s in range(S):
                bbarup[c.id, t, s] = m.add_var(f'bbarup_j{c.id}_w{t}_s{s}')
                bbardn[c.id, t, s] = m.add_var(f'bbardn_j{c.id}_w{t}_s{s}')

    safety = store.safety_profile(T)
    dl, dlin, dlout = {}, {}, {}
    for t in range(1, T + 1):
        for s in range(S):
            dl[t, s] = m.add_var(f'dl_w{t}_s{s}', lb=safety[t - 1], ub=store.cap)
            dlin[t, s] = m.add_var(f'dlin_w{t}_s{s}')
            dlout[t, s] = m.add_var(f'dlout_w{t}_s{s}', ub=H * store.max_outflow)

    p, qchp, qaux, qmiss, qbm = {}, {}, {}, {}, {}
    for t in range(1, T + 1):
        for s in range(S):
            p[t, s] = m.add_var(f'p_w{t}_s{s}', ub=H * chp.p_max)
            qchp[t, s] = m.add_var(f'qchp_w{t}_s{s}', ub=H * chp.q_max)
            qaux[t, s] = m.add_var(f'qaux_w{t}_s{s}', ub=H * aux.q_max)
            qmiss[t, s] = m.add_var(f'qmiss_w{t}_s{s}')
            qbm[t, s] = m.add_var(f'qbm_w{t}_s{s}')
    dlend = {s: m.add_var(f'dlend_s{s}') for s in range(S)}

    # contract logic
    for c in contracts:
        total = LinExpr.total(d[c.id, t] for t in range(1, T + 1))
        m.add_constraint(total - c.deliveries_min * u[c.id] >= 0, f'actlo_j{c.id}')
        m.add_constraint(total - c.deliveries_max * u[c.id] <= 0, f'acthi_j{c.id}')
        window = c.window_weeks(H)
        limit = c.deliveries_per_window(H)
        for t in range(1, T + 1):
            first = max(1, t - window + 1)
            recent = LinExpr.total(d[c.id, tau] for tau in range(first, t + 1))
            m.add_constraint(recent <= limit, f'freq_j{c.id}_w{t}')
        for t in range(1, T + 1):
            key = (c.id, t)
            tag = f'j{c.id}_w{t}'
            high = b[key] + bup[key] - c.amount_max * d[key]
            low = b[key] - bdn[key] - c.amount_min * d[key]
            m.add_constraint(high <= 0, f'amthi_{tag}')
            m.add_constraint(low >= 0, f'amtlo_{tag}')
            m.add_constraint(bup[key] - c.opt_up * b[key] <= 0, f'optup_{tag}')
            m.add_constraint(bdn[key] - c.opt_down * b[key] <= 0, f'optdn_{tag}')
            for s in range(S):
                used_up, used_down = bbarup[c.id, t, s], bbardn[c.id, t, s]
                m.add_constraint(used_up - bup[key] <= 0, f'useup_{tag}_s{s}')
                m.add_constraint(used_down - bdn[key] <= 0, f'usedn_{tag}_s{s}')

    # deliveries of all contracts must fit into one week at the spacing
    # the operational model enforces
    if store.delivery_gap > 0 and contracts:
        slots = (H - 1) // store.delivery_gap + 1
        for t in range(1, T + 1):
            weekly = LinExpr.total(d[c.id, t] for c in contracts)
            m.add_constraint(weekly <= slots, f'slots_w{t}')

    # biomass storage and production
    theta = chp.theta
    for s in range(S):
        for t in range(1, T + 1):
            tag = f'w{t}_s{s}'
            inflow = LinExpr.total(
                b[c.id, t] + bbarup[c.id, t, s] - bbardn[c.id, t, s] for c in contracts
            )
            m.add_constraint(
                dlin[t, s] - store.calorific * inflow == 0, f'inflow_{tag}'
            )
            previous = dl[t - 1, s] if t > 1 else store.initial
            m.add_constraint(
                dl[t, s] - previous - dlin[t, s] + dlout[t, s] == 0, f'level_{tag}'
            )
            m.add_constraint(
                dlout[t, s]
                - chp.fuel_per_power() * p[t, s]
                - chp.fuel_per_heat() * qchp[t, s]
                == 0,
                f'burn_{tag}',
            )
            m.add_constraint(
                p[t, s] - theta * qchp[t, s] <= H * chp.p_max, f'chphi_{tag}'
            )
            m.add_constraint(p[t, s] - theta * qchp[t, s] >= 0, f'chplo_{tag}')
            m.add_constraint(chp.xi * qchp[t, s] - p[t, s] <= 0, f'xi_{tag}')
            m.add_constraint(
                qchp[t, s] + qaux[t, s] + qmiss[t, s] == float(demand[s, t - 1]),
                f'heat_{tag}',
            )
            m.add_constraint(
                qchp[t, s] + qbm[t, s]
                >= cost.biomass_share_target * float(demand[s, t - 1]),
                f'share_{tag}',
            )
        m.add_constraint(dl[T, s] - dlend[s] <= store.initial, f'end_s{s}')

    # objective
    obj = LinExpr()
    for c in contracts:
        for t in range(1, T + 1):
            key = (c.id, t)
            obj.add(b[key], c.base_price)
            obj.add(bup[key], c.up_price - psi[t - 1])
            obj.add(bdn[key], c.down_price - psi[t - 1])
            for s in range(S):
                obj.add(bbarup[c.id, t, s], pi[s] * c.base_price)
                obj.add(bbardn[c.id, t, s], -pi[s] * c.base_price)
    for s in range(S):
        for t in range(1, T + 1):
            w = t - 1
            obj.add(p[t, s], pi[s] * (cost.chp_op + net_elec_cost[w]))
            obj.add(qchp[t, s], -pi[s] * cost.chp_op * theta)
            obj.add(qaux[t, s], pi[s] * aux_cost[w] / aux.eff)
            obj.add(dl[t, s], pi[s] * store.inventory_cost)
            obj.add(qmiss[t, s], pi[s] * cost.penalty_miss)
            obj.add(qbm[t, s], pi[s] * cost.penalty_bm)
        obj.add(dlend[s], pi[s] * cost.penalty_store)
    m.set_objective(obj)

    index = ContractModelIndex(
        m, tuple(c.id for c in contracts), T, S, tuple(float(x) for x in pi)
    )
    logger.debug(f'built {m!r}')
    return m, index


def _integral(value: float, name: str, tol: float) -> int:
    if abs(value - round(value)) > tol:
        raise ModelError(f'integrality violation: {name} = {value}')
    return int(round(value))


def _clean(value: float, tol: float) -> float:
    return 0.0 if abs(value) <= tol else value


def extract_contract_plan(
    index: ContractModelIndex,
    assignment: Assignment,
    contracts: Sequence[ContractSpec] | None = None,
    hours_per_week: int = config.HOURS_PER_WEEK,
    tol: float = config.FEAS_TOL,
) -> ContractPlan:
    """First-stage values of a solved contract model as a plan."""
    if not assignment.status.has_solution:
        raise SolverError(f'contract model has no solution: {assignment.status.value}')
    J, T = len(index.contract_ids), index.n_weeks
    selected = np.zeros(J, bool)
    U = np.zeros((J, T), int)
    B, Bp, Bm = np.zeros((J, T)), np.zeros((J, T)), np.zeros((J, T))
    for j, cid in enumerate(index.contract_ids):
        name = f'u_j{cid}'
        selected[j] = _integral(assignment.get(name), name, tol) == 1
        for t in range(1, T + 1):
            name = f'd_j{cid}_w{t}'
            U[j, t - 1] = _integral(assignment.get(name), name, tol)
            B[j, t - 1] = _clean(assignment.get(f'b_j{cid}_w{t}'), tol)
            Bp[j, t - 1] = _clean(assignment.get(f'bup_j{cid}_w{t}'), tol)
            Bm[j, t - 1] = _clean(assignment.get(f'bdn_j{cid}_w{t}'), tol)
        if not selected[j] and (U[j].any() or B[j].any() or Bp[j].any() or Bm[j].any()):
            raise ModelError(f'contract {cid} is not selected but has deliveries')
    plan = ContractPlan(index.contract_ids, selected, U, B, Bp, Bm)
    if contracts is not None:
        plan.validate(contracts, hours_per_week)
    logger.info(
        f'plan: {int(selected.sum())} of {J} contracts, {int(U.sum())} deliveries, '
        f'{B.sum():.1f} t base, options up {Bp.sum():.1f} t down {Bm.sum():.1f} t'
    )
    return plan


def fix_first_stage(model: Model, plan: ContractPlan) -> None:
    """Pin u, d, b, b+ and b- of `model` to the values of `plan`."""
    for j, cid in enumerate(plan.contract_ids):
        model.fix(model.var(f'u_j{cid}'), float(plan.selected[j]))
        for t in range(1, plan.n_weeks + 1):
            model.fix(model.var(f'd_j{cid}_w{t}'), float(plan.deliveries[j, t - 1]))
            model.fix(model.var(f'b_j{cid}_w{t}'), plan.base[j, t - 1])
            model.fix(model.var(f'bup_j{cid}_w{t}'), plan.up[j, t - 1])
            model.fix(model.var(f'bdn_j{cid}_w{t}'), plan.down[j, t - 1])


def evaluate_plan(
    plant: PlantConfig,
    contracts: Sequence[ContractSpec],
    plan: ContractPlan,
    weekly: ScenarioSet,
    net_elec_cost,
    aux_cost,
    psi,
    solver,
) -> float:
    """Expected contract-model cost of a given plan on `weekly` scenarios."""
    model, _ = build_contract_model(
        plant, contracts, weekly, net_elec_cost, aux_cost, psi
    )
    fix_first_stage(model, plan)
    result = solver.solve_optimal(model, 'plan evaluation')
    return float(result.objective)


def verify_plan_solution(
    index: ContractModelIndex,
    assignment: Assignment,
    plant: PlantConfig,
    weekly: ScenarioSet,
    tol: float = config.FEAS_TOL,
) -> list[str]:
    """Linear scan of a contract-model solution: storage, recourse and heat balance."""
    v = assignment.get
    store = plant.biomass_storage
    demand = weekly.matrix('demand')
    safety = store.safety_profile(index.n_weeks)
    problems = []

    def off(a: float, b: float) -> bool:
        return abs(a - b) > tol * max(1.0, abs(a), abs(b))

    for s in index.scenarios():
        previous = store.initial
        for t in index.weeks():
            tag = f'w{t}_s{s}'
            level = v(f'dl_{tag}')
            if off(level, previous + v(f'dlin_{tag}') - v(f'dlout_{tag}')):
                problems.append(f'storage recursion broken at {tag}')
            if level < safety[t - 1] - tol or level > store.cap + tol:
                problems.append(f'storage level {level} out of range at {tag}')
            heat = v(f'qchp_{tag}') + v(f'qaux_{tag}') + v(f'qmiss_{tag}')
            if off(heat, demand[s, t - 1]):
                problems.append(f'heat balance broken at {tag}')
            for cid in index.contract_ids:
                if v(f'bbarup_j{cid}_{tag}') > v(f'bup_j{cid}_w{t}') + tol:
                    problems.append(f'up-option usage above contract at j{cid} {tag}')
                if v(f'bbardn_j{cid}_{tag}') > v(f'bdn_j{cid}_w{t}') + tol:
                    problems.append(f'down-option usage above contract at j{cid} {tag}')
            previous = level
    return problems
