"""Hourly operational planning over a receding horizon of W weeks.

The delivery hours, amounts and option usage of the first week are shared by
all scenarios; everything after that, and all production, is decided per
scenario. The same builder yields the single-scenario realization model once
the first-week deliveries are fixed.

Variable names (hours 1-based over the horizon, scenarios 0-based):

    dhat_j{c}_t{t}_s{s}, b_j{c}_t{t}_s{s}, bup_j{c}_t{t}_s{s}, bdn_j{c}_t{t}_s{s}
    dl, dlin, dlout, dlex, x, y, z, p, qchp, qchpn, qchps, qaux, qauxn, qauxs,
    sl, sin, sout, qmiss, each as <name>_t{t}_s{s}
"""

import dataclasses as dtc
import logging
import math
from collections.abc import Sequence

import numpy as np
import pandas as pd

from chpplan import config
from chpplan.domain.params import ChpParams
from chpplan.domain.params import ContractSpec
from chpplan.domain.params import PlantConfig
from chpplan.domain.timeseries import Resolution
from chpplan.domain.timeseries import Scenario
from chpplan.domain.timeseries import ScenarioSet
from chpplan.domain.timeseries import SystemState
from chpplan.domain.timeseries import TimeGrid
from chpplan.domain.timeseries import derive_cost_series
from chpplan.errors import DataError
from chpplan.errors import ModelError
from chpplan.errors import SolverError
from chpplan.milp.model import LinExpr
from chpplan.milp.model import Model
from chpplan.milp.model import VarKind
from chpplan.milp.solver import Assignment
from chpplan.phase1 import ContractPlan

logger = logging.getLogger('phase2')

TRACE_COLUMNS = [
    'hour',
    'demand',
    'elec_price',
    'p',
    'q_chp',
    'q_aux',
    'q_miss',
    'biomass_level',
    'thermal_level',
    'on',
    'deliveries',
    'delivered',
]

COMPONENTS = (
    'biomass',
    'chp_operating',
    'startup_shutdown',
    'electricity',
    'auxiliary',
    'inventory',
    'penalty_miss',
    'penalty_excess',
)


def shutdown_reserve(chp: ChpParams) -> float:
    """Biomass needed to ramp down from full load and sit out the minimum up time.

    Whenever the unit is on at the end of a horizon, at least this much
    must be left in storage so the next week can always shut it down.
    """
    ramp_hours = math.ceil(max(chp.p_max - chp.p_min, 0.0) / chp.ramp_down)
    on_hours = max(chp.min_up - 1, ramp_hours)
    steps = range(1, on_hours + 1)
    load = sum(max(chp.p_min, chp.p_max - i * chp.ramp_down) for i in steps)
    return load * chp.fuel_per_power()


@dtc.dataclass(frozen=True)
class WeekDecisions:
    """Delivery flags and amounts per contract and hour of the week in focus."""

    contract_ids: tuple[str, ...]
    flags: np.ndarray
    base: np.ndarray
    up: np.ndarray
    down: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'contract_ids', tuple(self.contract_ids))
        object.__setattr__(self, 'flags', np.asarray(self.flags, dtype=int))
        for name in ('base', 'up', 'down'):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        shape = self.flags.shape
        if len(shape) != 2 or shape[0] != len(self.contract_ids):
            n = len(self.contract_ids)
            raise ModelError(f'flags have shape {shape}, want ({n}, hours)')
        for name in ('base', 'up', 'down'):
            if getattr(self, name).shape != shape:
                raise ModelError(f'{name} does not match the flags shape {shape}')
        for arr in (self.flags, self.base, self.up, self.down):
            arr.flags.writeable = False

    @property
    def n_hours(self) -> int:
        return self.flags.shape[1]

    @classmethod
    def empty(cls, n_hours: int) -> 'WeekDecisions':
        zeros = np.zeros((0, n_hours))
        return cls((), zeros, zeros, zeros, zeros)

    def delivered(self) -> np.ndarray:
        """Tonnes arriving per hour, options included."""
        return (self.base + self.up - self.down).sum(axis=0)

    def validate(
        self,
        plan: ContractPlan,
        week: int,
        delivery_gap: int,
        tol: float = config.FEAS_TOL,
    ) -> None:
        problems = []
        if np.any((self.flags != 0) & (self.flags != 1)):
            problems.append('delivery flags are not binary')
        arrivals = self.flags.sum(axis=0)
        if delivery_gap > 1:
            for t in range(self.n_hours):
                if arrivals[max(0, t - delivery_gap + 1) : t + 1].sum() > 1:
                    problems.append(
                        f'deliveries closer than {delivery_gap} h at hour {t + 1}'
                    )
                    break
        for j, cid in enumerate(self.contract_ids):
            row = plan.position(cid)
            U, B = plan.deliveries[row, week], plan.base[row, week]
            up_cap, down_cap = plan.up[row, week], plan.down[row, week]
            count, base = self.flags[j].sum(), self.base[j].sum()
            if count != U:
                problems.append(f'{cid}: {count} deliveries, plan has {U}')
            if abs(base - B) > tol * max(1.0, B):
                problems.append(f'{cid}: base amount {base} differs from {B}')
            if self.up[j].sum() > up_cap + tol * max(1.0, up_cap):
                problems.append(f'{cid}: up-option usage above the contracted cap')
            if self.down[j].sum() > down_cap + tol * max(1.0, down_cap):
                problems.append(f'{cid}: down-option usage above the contracted cap')
        if problems:
            raise ModelError('week decisions invalid: ' + '; '.join(problems))


@dtc.dataclass(frozen=True)
class OperationalIndex:
    model: Model
    first_week: int
    n_weeks: int
    hours_per_week: int
    n_scenarios: int
    probabilities: tuple[float, ...]
    active: tuple[tuple[str, ...], ...]
    constant: float
    realization: bool = False

    @property
    def n_hours(self) -> int:
        return self.n_weeks * self.hours_per_week

    def week_of(self, t: int) -> int:
        """Horizon week (0-based) of 1-based hour `t`."""
        return (t - 1) // self.hours_per_week

    def active_at(self, t: int) -> tuple[str, ...]:
        return self.active[self.week_of(t)]

    def hours(self) -> range:
        return range(1, self.n_hours + 1)

    def scenarios(self) -> range:
        return range(self.n_scenarios)


def _active_contracts(plan: ContractPlan, first_week: int, n_weeks: int):
    active = []
    for w in range(first_week, first_week + n_weeks):
        active.append(
            tuple(
                cid
                for j, cid in enumerate(plan.contract_ids)
                if plan.deliveries[j, w] > 0
            )
        )
    return tuple(active)


def _closed_hours(
    span: int, week: int, count: int, spacing: int, hours_per_week: int, what: str
) -> range:
    """Hours of `week` closed by a delivery `span` hours before the horizon.

    The span is shortened when `count` deliveries at `spacing` would no
    longer fit into the week.
    """
    latest = (week + 1) * hours_per_week - (count - 1) * spacing
    if span >= latest:
        logger.warning(
            f'{what}: carried spacing shortened to {latest - 1} h '
            f'so that {count} deliveries fit into week {week + 1} of the horizon'
        )
        span = latest - 1
    return range(week * hours_per_week + 1, span + 1)


def build_operational_model(
    plant: PlantConfig,
    contracts: Sequence[ContractSpec],
    plan: ContractPlan,
    first_week: int,
    scenarios: ScenarioSet,
    state: SystemState,
    remaining_up: np.ndarray | None = None,
    remaining_down: np.ndarray | None = None,
    name: str | None = None,
) -> tuple[Model, OperationalIndex]:
    """Deterministic equivalent for plan weeks [first_week, first_week + W).

    `first_week` is 0-based; W follows from the hourly `scenarios` grid.
    `remaining_up` / `remaining_down` are option caps per contract and plan
    week still available; they default to the contracted caps.
    """
    grid = scenarios.grid
    if grid.resolution is not Resolution.HOURLY:
        raise DataError('grid mismatch: operational model needs an hourly grid', 'grid')
    H, W, S = grid.hours_per_week, grid.n_weeks, len(scenarios)
    n_hours = grid.n_periods
    if first_week < 0 or first_week + W > plan.n_weeks:
        raise ModelError(
            f'missing plan row: weeks {first_week + 1}..{first_week + W} '
            f'of a {plan.n_weeks}-week plan'
        )
    chp, aux = plant.chp, plant.aux
    store, thermal, cost = plant.biomass_storage, plant.thermal_storage, plant.cost
    state.check_thermal(thermal.cap_min, thermal.cap_max)
    specs = {c.id: c for c in contracts}
    for cid in plan.contract_ids:
        if cid not in specs:
            raise ModelError(f'plan names unknown contract {cid!r}')
    up_cap, down_cap = plan.up, plan.down
    if remaining_up is not None:
        up_cap = np.asarray(remaining_up, float)
    if remaining_down is not None:
        down_cap = np.asarray(remaining_down, float)

    active = _active_contracts(plan, first_week, W)
    pi = scenarios.probabilities
    costs = [
        derive_cost_series(s.elec_price, s.fuel_price, cost, aux) for s in scenarios
    ]
    constant = sum(plan.fixed_cost(contracts, first_week + w) for w in range(W))

    # hours at the start with a forced status, from the carried-over state
    forced = {}
    if state.chp_on and state.hours_in_state < chp.min_up:
        left = min(chp.min_up - state.hours_in_state, n_hours)
        forced = {t: 1.0 for t in range(1, left + 1)}
    elif not state.chp_on and state.hours_in_state < chp.min_down:
        left = min(chp.min_down - state.hours_in_state, n_hours)
        forced = {t: 0.0 for t in range(1, left + 1)}

    m = Model(name or f'operations_w{first_week + 1}')
    v = {}

    def add(key: str, t: int, s: int, cid: str | None = None, **kwargs):
        label = f'{key}_j{cid}_t{t}_s{s}' if cid is not None else f'{key}_t{t}_s{s}'
        var = m.add_var(label, **kwargs)
        v[key, cid, t, s] = var
        return var

    for s in range(S):
        for t in range(1, n_hours + 1):
            week = (t - 1) // H
            for cid in active[week]:
                add('dhat', t, s, cid, kind=VarKind.BINARY)
                add('b', t, s, cid)
                add('bup', t, s, cid)
                add('bdn', t, s, cid)
            floor = store.safety_level(first_week + week + 1) if week > 0 else 0.0
            add('dl', t, s, lb=floor)
            add('dlin', t, s)
            add('dlout', t, s, ub=store.max_outflow)
            add('dlex', t, s)
            status = forced.get(t)
            if status is None:
                add('x', t, s, kind=VarKind.BINARY)
            else:
                add('x', t, s, kind=VarKind.BINARY, lb=status, ub=status)
            add('y', t, s, kind=VarKind.BINARY)
            add('z', t, s, kind=VarKind.BINARY)
            add('p', t, s)
            add('qchp', t, s, ub=chp.q_max)
            add('qchpn', t, s)
            add('qchps', t, s)
            add('qaux', t, s, ub=aux.q_max)
            add('qauxn', t, s)
            add('qauxs', t, s)
            add('sl', t, s, lb=thermal.cap_min, ub=thermal.cap_max)
            add('sin', t, s, ub=thermal.max_flow)
            add('sout', t, s, ub=thermal.max_flow)
            add('qmiss', t, s)

    def var(key, t, s, cid=None):
        return v[key, cid, t, s]

    # deliveries
    gap = store.delivery_gap
    # hours still inside a spacing window opened before the first hour
    carried = state.hours_since_delivery
    closed, closed_any = {}, range(0)
    for c in contracts:
        back = carried.get(c.id)
        weeks = [w for w in range(W) if c.id in active[w]]
        if back is None or back >= c.freq or not weeks:
            continue
        count = int(plan.deliveries[plan.position(c.id), first_week + weeks[0]])
        closed[c.id] = _closed_hours(
            c.freq - back, weeks[0], count, c.freq, H, f'contract {c.id}'
        )
    weeks = [w for w in range(W) if active[w]]
    if gap > 1 and carried and weeks:
        count = sum(
            int(plan.deliveries[plan.position(cid), first_week + weeks[0]])
            for cid in active[weeks[0]]
        )
        closed_any = _closed_hours(
            gap - min(carried.values()), weeks[0], count, gap, H, 'delivery gap'
        )

    for s in range(S):
        for w in range(W):
            hours = range(w * H + 1, (w + 1) * H + 1)
            pw = first_week + w
            for cid in active[w]:
                j = plan.position(cid)
                tag = f'j{cid}_w{w + 1}_s{s}'
                m.add_constraint(
                    LinExpr.total(var('dhat', t, s, cid) for t in hours)
                    == float(plan.deliveries[j, pw]),
                    f'count_{tag}',
                )
                m.add_constraint(
                    LinExpr.total(var('b', t, s, cid) for t in hours)
                    == plan.base[j, pw],
                    f'amount_{tag}',
                )
                m.add_constraint(
                    LinExpr.total(var('bup', t, s, cid) for t in hours)
                    <= max(float(up_cap[j, pw]), 0.0),
                    f'capup_{tag}',
                )
                m.add_constraint(
                    LinExpr.total(var('bdn', t, s, cid) for t in hours)
                    <= max(float(down_cap[j, pw]), 0.0),
                    f'capdn_{tag}',
                )
                c = specs[cid]
                for t in hours:
                    ttag = f'j{cid}_t{t}_s{s}'
                    dhat = var('dhat', t, s, cid)
                    base = var('b', t, s, cid)
                    high = base + var('bup', t, s, cid) - c.amount_max * dhat
                    low = base - var('bdn', t, s, cid) - c.amount_min * dhat
                    m.add_constraint(high <= 0, f'amthi_{ttag}')
                    m.add_constraint(low >= 0, f'amtlo_{ttag}')
        # at most one delivery of a contract in any F_j consecutive hours
        for c in contracts:
            own = [t for t in range(1, n_hours + 1) if c.id in active[(t - 1) // H]]
            if c.freq < 2 or len(own) < 2:
                continue
            for t in own:
                window = [tau for tau in own if t - c.freq < tau <= t]
                if len(window) > 1:
                    m.add_constraint(
                        LinExpr.total(var('dhat', tau, s, c.id) for tau in window) <= 1,
                        f'freq_j{c.id}_t{t}_s{s}',
                    )
        # and at most one delivery of any contract in delivery_gap consecutive hours
        if gap > 1:
            slots = [t for t in range(1, n_hours + 1) if active[(t - 1) // H]]
            for t in slots:
                window = [tau for tau in slots if t - gap < tau <= t]
                terms = [
                    var('dhat', tau, s, cid)
                    for tau in window
                    for cid in active[(tau - 1) // H]
                ]
                if len(terms) > 1:
                    m.add_constraint(LinExpr.total(terms) <= 1, f'gap_t{t}_s{s}')

        for cid, hours in closed.items():
            if hours:
                m.add_constraint(
                    LinExpr.total(var('dhat', t, s, cid) for t in hours) <= 0,
                    f'carry_j{cid}_s{s}',
                )
        terms = [
            var('dhat', t, s, cid) for t in closed_any for cid in active[(t - 1) // H]
        ]
        if terms:
            m.add_constraint(LinExpr.total(terms) <= 0, f'carrygap_s{s}')

    # week-one deliveries are shared by all scenarios
    for s in range(1, S):
        for t in range(1, H + 1):
            for cid in active[0]:
                for key in ('dhat', 'b', 'bup', 'bdn'):
                    m.add_constraint(
                        var(key, t, s, cid) - var(key, t, 0, cid) == 0,
                        f'na{key}_j{cid}_t{t}_s{s}',
                    )

    theta = chp.theta
    reserve = shutdown_reserve(chp)
    for s, scenario in enumerate(scenarios):
        for t in range(1, n_hours + 1):
            tag = f't{t}_s{s}'
            first = t == 1
            cids = active[(t - 1) // H]
            inflow = LinExpr.total(
                var('b', t, s, cid) + var('bup', t, s, cid) - var('bdn', t, s, cid)
                for cid in cids
            )
            m.add_constraint(
                var('dlin', t, s) - store.calorific * inflow == 0, f'inflow_{tag}'
            )
            dl_prev = state.biomass_level if first else var('dl', t - 1, s)
            m.add_constraint(
                var('dl', t, s) - dl_prev - var('dlin', t, s) + var('dlout', t, s) == 0,
                f'level_{tag}',
            )
            m.add_constraint(
                var('dl', t, s) - var('dlex', t, s) <= store.cap, f'cap_{tag}'
            )
            m.add_constraint(
                var('dlout', t, s)
                - chp.fuel_per_power() * var('p', t, s)
                - chp.fuel_per_heat() * var('qchp', t, s)
                == 0,
                f'burn_{tag}',
            )

            # CHP region and commitment
            x, y, z = var('x', t, s), var('y', t, s), var('z', t, s)
            p, qchp = var('p', t, s), var('qchp', t, s)
            m.add_constraint(p - theta * qchp - chp.p_min * x >= 0, f'chplo_{tag}')
            m.add_constraint(p - theta * qchp - chp.p_max * x <= 0, f'chphi_{tag}')
            m.add_constraint(chp.xi * qchp - p <= 0, f'xi_{tag}')
            m.add_constraint(qchp - chp.q_max * x <= 0, f'qcap_{tag}')
            x_prev = float(state.chp_on) if first else var('x', t - 1, s)
            m.add_constraint(y - z - x + x_prev == 0, f'status_{tag}')
            m.add_constraint(y + z <= 1, f'onestep_{tag}')
            ups = LinExpr.total(
                var('y', tau, s) for tau in range(max(1, t - chp.min_up + 1), t + 1)
            )
            m.add_constraint(ups - x <= 0, f'minup_{tag}')
            downs = LinExpr.total(
                var('z', tau, s) for tau in range(max(1, t - chp.min_down + 1), t + 1)
            )
            m.add_constraint(downs + x <= 1, f'mindn_{tag}')
            p_prev = state.chp_power if first else var('p', t - 1, s)
            m.add_constraint(
                p - p_prev - chp.ramp_up * x_prev - chp.p_min * y <= 0, f'rampup_{tag}'
            )
            m.add_constraint(
                p - p_prev + chp.ramp_down * x + chp.p_min * z >= 0, f'rampdn_{tag}'
            )

            # heat split, thermal storage, balance
            m.add_constraint(
                qchp - var('qchpn', t, s) - var('qchps', t, s) == 0, f'splitchp_{tag}'
            )
            m.add_constraint(
                var('qaux', t, s) - var('qauxn', t, s) - var('qauxs', t, s) == 0,
                f'splitaux_{tag}',
            )
            m.add_constraint(
                var('sin', t, s) - var('qchps', t, s) - var('qauxs', t, s) == 0,
                f'tsin_{tag}',
            )
            s_prev = state.thermal_level if first else var('sl', t - 1, s)
            m.add_constraint(
                var('sl', t, s) - s_prev - var('sin', t, s) + var('sout', t, s) == 0,
                f'thermal_{tag}',
            )
            m.add_constraint(var('sout', t, s) - s_prev <= 0, f'shift_{tag}')
            m.add_constraint(
                var('qchpn', t, s) + var('qauxn', t, s) + var('sout', t, s)
                + var('qmiss', t, s)
                == float(scenario.demand[t - 1]),
                f'heat_{tag}',
            )
        m.add_constraint(var('sl', n_hours, s) == state.thermal_level, f'close_s{s}')
        if reserve > 0:
            m.add_constraint(
                var('dl', n_hours, s) - reserve * var('x', n_hours, s) >= 0,
                f'reserve_s{s}',
            )

    obj = LinExpr(constant=constant)
    for s in range(S):
        net_elec, aux_cost = costs[s]
        w_s = float(pi[s])
        for t in range(1, n_hours + 1):
            for cid in active[(t - 1) // H]:
                price = specs[cid].base_price
                obj.add(var('bup', t, s, cid), w_s * price)
                obj.add(var('bdn', t, s, cid), -w_s * price)
            obj.add(var('p', t, s), w_s * (cost.chp_op + net_elec[t - 1]))
            obj.add(var('qchp', t, s), -w_s * cost.chp_op * theta)
            obj.add(var('y', t, s), w_s * cost.startup)
            obj.add(var('z', t, s), w_s * cost.shutdown)
            obj.add(var('qaux', t, s), w_s * aux_cost[t - 1] / aux.eff)
            obj.add(var('dl', t, s), w_s * store.inventory_cost)
            obj.add(var('dlex', t, s), w_s * cost.penalty_store)
            obj.add(var('qmiss', t, s), w_s * cost.penalty_miss)
    m.set_objective(obj)

    index = OperationalIndex(
        m, first_week, W, H, S, tuple(float(x) for x in pi), active, constant
    )
    logger.debug(f'built {m!r}, {sum(map(len, active))} active contract-weeks')
    return m, index


def _round_flag(value: float, name: str, tol: float) -> int:
    if abs(value - round(value)) > tol:
        raise ModelError(f'integrality violation: {name} = {value}')
    return int(round(value))


def extract_week_decisions(
    index: OperationalIndex,
    assignment: Assignment,
    tol: float = config.FEAS_TOL,
) -> WeekDecisions:
    """First-week deliveries, checked to agree across all scenarios."""
    if not assignment.status.has_solution:
        raise SolverError(
            f'operational model has no solution: {assignment.status.value}'
        )
    H = index.hours_per_week
    ids = index.active[0]
    arrays = {key: np.zeros((len(ids), H)) for key in ('dhat', 'b', 'bup', 'bdn')}
    for j, cid in enumerate(ids):
        for t in range(1, H + 1):
            for key, arr in arrays.items():
                value = assignment.get(f'{key}_j{cid}_t{t}_s0')
                for s in range(1, index.n_scenarios):
                    other = assignment.get(f'{key}_j{cid}_t{t}_s{s}')
                    if abs(other - value) > tol * max(1.0, abs(value)):
                        raise ModelError(
                            f'non-anticipativity mismatch: {key}_j{cid}_t{t} is '
                            f'{value} in scenario 0 and {other} in scenario {s}'
                        )
                arr[j, t - 1] = value if abs(value) > tol else 0.0
    flags = np.zeros((len(ids), H), int)
    for j, cid in enumerate(ids):
        for t in range(H):
            name = f'dhat_j{cid}_t{t + 1}'
            flags[j, t] = _round_flag(arrays['dhat'][j, t], name, tol)
    return WeekDecisions(ids, flags, arrays['b'], arrays['bup'], arrays['bdn'])


def fix_and_realize(
    plant: PlantConfig,
    contracts: Sequence[ContractSpec],
    plan: ContractPlan,
    week: int,
    decisions: WeekDecisions,
    realized: Scenario,
    state: SystemState,
) -> tuple[Model, OperationalIndex]:
    """One-week, one-scenario model with the deliveries of `decisions` fixed."""
    H = decisions.n_hours
    if len(realized) != H:
        raise DataError(
            f'realized week has {len(realized)} hours, expected {H}', 'realized'
        )
    grid = TimeGrid.hourly(1, H)
    scenarios = ScenarioSet(grid, (realized.with_probability(1.0),))
    model, index = build_operational_model(
        plant, contracts, plan, week, scenarios, state, name=f'realize_w{week + 1}'
    )
    if index.active[0] != decisions.contract_ids:
        raise ModelError(
            f'decisions cover contracts {decisions.contract_ids}, '
            f'week {week + 1} has {index.active[0]}'
        )
    values = {
        'dhat': decisions.flags,
        'b': decisions.base,
        'bup': decisions.up,
        'bdn': decisions.down,
    }
    for j, cid in enumerate(decisions.contract_ids):
        for t in range(1, H + 1):
            for key, arr in values.items():
                model.fix(model.var(f'{key}_j{cid}_t{t}_s0'), float(arr[j, t - 1]))
    return model, dtc.replace(index, realization=True)


@dtc.dataclass(frozen=True)
class WeeklyResult:
    """Realized cost of one week, split by component."""

    week: int
    biomass: float
    chp_operating: float
    startup_shutdown: float
    electricity: float
    auxiliary: float
    inventory: float
    penalty_miss: float
    penalty_excess: float
    missed_heat: float
    excess_storage: float
    end_state: SystemState
    trace: pd.DataFrame = dtc.field(repr=False, compare=False)
    decisions: WeekDecisions | None = dtc.field(default=None, repr=False, compare=False)
    planned_objective: float | None = None

    def __post_init__(self):
        if self.missed_heat < -config.FEAS_TOL:
            raise ModelError(f'week {self.week + 1}: negative missed heat')

    @property
    def total(self) -> float:
        return sum(getattr(self, name) for name in COMPONENTS)

    @property
    def penalties(self) -> float:
        return self.penalty_miss + self.penalty_excess

    def components(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in COMPONENTS}


def _end_state(index, assignment, plant, state) -> SystemState:
    n, get = index.n_hours, assignment.get
    status = [get(f'x_t{t}_s0') > 0.5 for t in index.hours()]
    last = status[-1]
    run = 0
    for on in reversed(status):
        if on != last:
            break
        run += 1
    if run == n and last == state.chp_on:
        run += state.hours_in_state
    run = min(run, max(plant.chp.min_up, plant.chp.min_down))
    power = get(f'p_t{n}_s0') if last else 0.0
    since = {cid: h + n for cid, h in state.hours_since_delivery.items()}
    for t in index.hours():
        for cid in index.active_at(t):
            if get(f'dhat_j{cid}_t{t}_s0') > 0.5:
                since[cid] = n + 1 - t
    return SystemState(
        biomass_level=max(get(f'dl_t{n}_s0'), 0.0),
        thermal_level=get(f'sl_t{n}_s0'),
        chp_on=last,
        chp_power=max(power, 0.0),
        hours_in_state=run,
        hours_since_delivery=since,
    )


def summarize_week(
    index: OperationalIndex,
    assignment: Assignment,
    plant: PlantConfig,
    contracts: Sequence[ContractSpec],
    realized: Scenario,
    state: SystemState,
    decisions: WeekDecisions | None = None,
    planned_objective: float | None = None,
) -> WeeklyResult:
    """Cost components and hourly trace of a solved realization model."""
    if not assignment.status.has_solution:
        raise SolverError(
            f'realization model has no solution: {assignment.status.value}'
        )
    get = assignment.get
    cost, aux, chp = plant.cost, plant.aux, plant.chp
    specs = {c.id: c for c in contracts}
    net_elec, aux_cost = derive_cost_series(
        realized.elec_price, realized.fuel_price, cost, aux
    )
    parts = dict.fromkeys(COMPONENTS, 0.0)
    parts['biomass'] = index.constant
    missed = excess = 0.0
    rows = []
    for t in index.hours():
        tag = f't{t}_s0'
        p, qchp, qaux = get(f'p_{tag}'), get(f'qchp_{tag}'), get(f'qaux_{tag}')
        qmiss, dlex = get(f'qmiss_{tag}'), get(f'dlex_{tag}')
        arrivals, tonnes = 0, 0.0
        for cid in index.active_at(t):
            bup, bdn = get(f'bup_j{cid}_{tag}'), get(f'bdn_j{cid}_{tag}')
            parts['biomass'] += specs[cid].base_price * (bup - bdn)
            arrivals += int(round(get(f'dhat_j{cid}_{tag}')))
            tonnes += get(f'b_j{cid}_{tag}') + bup - bdn
        parts['chp_operating'] += cost.chp_op * (p - chp.theta * qchp)
        parts['startup_shutdown'] += (
            cost.startup * get(f'y_{tag}') + cost.shutdown * get(f'z_{tag}')
        )
        parts['electricity'] += net_elec[t - 1] * p
        parts['auxiliary'] += aux_cost[t - 1] * qaux / aux.eff
        parts['inventory'] += plant.biomass_storage.inventory_cost * get(f'dl_{tag}')
        parts['penalty_miss'] += cost.penalty_miss * qmiss
        parts['penalty_excess'] += cost.penalty_store * dlex
        missed += qmiss
        excess += dlex
        rows.append(
            (
                t,
                realized.demand[t - 1],
                realized.elec_price[t - 1],
                p,
                qchp,
                qaux,
                qmiss,
                get(f'dl_{tag}'),
                get(f'sl_{tag}'),
                int(get(f'x_{tag}') > 0.5),
                arrivals,
                tonnes,
            )
        )
    result = WeeklyResult(
        week=index.first_week,
        **parts,
        missed_heat=max(missed, 0.0),
        excess_storage=excess,
        end_state=_end_state(index, assignment, plant, state),
        trace=pd.DataFrame(rows, columns=TRACE_COLUMNS),
        decisions=decisions,
        planned_objective=planned_objective,
    )
    if assignment.objective is not None and abs(result.total - assignment.objective) > (
        1e-6 * max(1.0, abs(assignment.objective))
    ):
        logger.warning(
            f'week {index.first_week + 1}: components sum to {result.total:.6f}, '
            f'backend reported {assignment.objective:.6f}'
        )
    return result


def realize_week(
    plant: PlantConfig,
    contracts: Sequence[ContractSpec],
    plan: ContractPlan,
    week: int,
    decisions: WeekDecisions,
    realized: Scenario,
    state: SystemState,
    solver,
    planned_objective: float | None = None,
) -> tuple[WeeklyResult, Assignment]:
    model, index = fix_and_realize(
        plant, contracts, plan, week, decisions, realized, state
    )
    assignment = solver.solve_optimal(model, f'realization of week {week + 1}')
    result = summarize_week(
        index,
        assignment,
        plant,
        contracts,
        realized,
        state,
        decisions,
        planned_objective,
    )
    logger.info(
        f'week {week + 1}: realized {result.total:.2f}, '
        f'missed {result.missed_heat:.2f} MWh, '
        f'biomass {result.end_state.biomass_level:.1f} MWt'
    )
    return result, assignment


def verify_schedule(
    index: OperationalIndex,
    assignment: Assignment,
    plant: PlantConfig,
    scenarios: ScenarioSet,
    state: SystemState,
    tol: float = config.FEAS_TOL,
) -> list[str]:
    """Linear scan for commitment, ramping, storage, closure and balance violations."""
    get = assignment.get
    chp = plant.chp
    problems = []

    def off(a: float, b: float) -> bool:
        return abs(a - b) > tol * max(1.0, abs(a), abs(b))

    for s, scenario in enumerate(scenarios):
        x_prev, p_prev = float(state.chp_on), state.chp_power
        dl_prev, s_prev = state.biomass_level, state.thermal_level
        ys, zs = [], []
        for t in index.hours():
            tag = f't{t}_s{s}'
            x, y, z = (round(get(f'{k}_{tag}')) for k in ('x', 'y', 'z'))
            p = get(f'p_{tag}')
            ys.append(y)
            zs.append(z)
            if y - z != x - x_prev or y + z > 1:
                problems.append(f'status logic broken at {tag}')
            if sum(ys[-chp.min_up :]) > x:
                problems.append(f'minimum up time violated at {tag}')
            if sum(zs[-chp.min_down :]) > 1 - x:
                problems.append(f'minimum down time violated at {tag}')
            if p - p_prev > chp.ramp_up * x_prev + chp.p_min * y + tol:
                problems.append(f'ramp-up limit exceeded at {tag}')
            if p - p_prev < -chp.ramp_down * x - chp.p_min * z - tol:
                problems.append(f'ramp-down limit exceeded at {tag}')
            level = get(f'dl_{tag}')
            if off(level, dl_prev + get(f'dlin_{tag}') - get(f'dlout_{tag}')):
                problems.append(f'biomass recursion broken at {tag}')
            thermal = get(f'sl_{tag}')
            if off(thermal, s_prev + get(f'sin_{tag}') - get(f'sout_{tag}')):
                problems.append(f'thermal recursion broken at {tag}')
            supplied = (
                get(f'qchpn_{tag}') + get(f'qauxn_{tag}') + get(f'sout_{tag}')
                + get(f'qmiss_{tag}')
            )
            if off(supplied, scenario.demand[t - 1]):
                problems.append(f'heat balance broken at {tag}')
            x_prev, p_prev, dl_prev, s_prev = x, p, level, thermal
        if off(s_prev, state.thermal_level):
            problems.append(f'thermal storage not closed in scenario {s}')
        if s > 0:
            for t in range(1, index.hours_per_week + 1):
                for cid in index.active[0]:
                    for key in ('dhat', 'b', 'bup', 'bdn'):
                        name = f'{key}_j{cid}_t{t}'
                        if off(get(f'{name}_s{s}'), get(f'{name}_s0')):
                            problems.append(f'non-anticipativity broken for {name}')
    return problems
