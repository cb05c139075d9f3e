"""Contract phase, the weekly receding-horizon loop and run comparison."""

import asyncio
import dataclasses as dtc
import logging
from collections.abc import Sequence
from typing import Protocol

import numpy as np
import pandas as pd

from chpplan import config
from chpplan.domain.params import ContractSpec
from chpplan.domain.params import PlantConfig
from chpplan.domain.timeseries import ScenarioSet
from chpplan.domain.timeseries import SystemState
from chpplan.domain.timeseries import YearSeries
from chpplan.domain.timeseries import derive_cost_series
from chpplan.domain.timeseries import incentive_schedule
from chpplan.errors import DataError
from chpplan.errors import PlannerError
from chpplan.errors import SolverError
from chpplan.milp.model import ModelStats
from chpplan.milp.model import model_stats
from chpplan.phase1 import ContractPlan
from chpplan.phase1 import build_contract_model
from chpplan.phase1 import extract_contract_plan
from chpplan.phase2 import WeeklyResult
from chpplan.phase2 import build_operational_model
from chpplan.phase2 import extract_week_decisions
from chpplan.phase2 import realize_week
from chpplan.scengen.methods import build_scenario_set
from chpplan.scengen.methods import historical_scenarios
from chpplan.scengen.montecarlo import sub_seed

logger = logging.getLogger('orchestrator')

COMPARISON_COLUMNS = [
    'sample',
    'sto_max',
    'exp_max',
    'delta_max',
    'sto_min',
    'exp_min',
    'delta_min',
    'sto_avg',
    'exp_avg',
    'delta_avg',
]


@dtc.dataclass(frozen=True)
class Runtime:
    stage: str
    week: int
    seconds: float


@dtc.dataclass(frozen=True)
class ContractInputs:
    """Weekly scenarios and expected cost series the contract model is built on."""

    weekly: ScenarioSet
    net_elec_cost: np.ndarray
    aux_cost: np.ndarray
    psi: np.ndarray


@dtc.dataclass(frozen=True)
class ContractPhase:
    plan: ContractPlan
    objective: float
    runtime: float
    stats: ModelStats
    inputs: ContractInputs


@dtc.dataclass(frozen=True)
class YearResult:
    sample: str
    method: str
    horizon: int
    seed: int
    expected_value: bool
    plan: ContractPlan = dtc.field(repr=False)
    weeks: tuple[WeeklyResult, ...] = dtc.field(repr=False)
    runtimes: tuple[Runtime, ...] = dtc.field(default=(), repr=False)
    model_sizes: tuple[tuple[str, ModelStats], ...] = dtc.field(default=(), repr=False)

    @property
    def configuration(self) -> str:
        kind = 'Exp' if self.expected_value else 'Sto'
        return f'{kind}-{self.method}-W{self.horizon}'

    @property
    def total(self) -> float:
        return sum(w.total for w in self.weeks)

    @property
    def total_penalty(self) -> float:
        return sum(w.penalties for w in self.weeks)

    @property
    def missed_heat(self) -> float:
        return sum(w.missed_heat for w in self.weeks)


def contract_inputs(
    plant: PlantConfig,
    archive: Sequence[YearSeries],
    n_weeks: int | None = None,
    hours_per_week: int = config.HOURS_PER_WEEK,
) -> ContractInputs:
    """Weekly P scenarios, expected net electricity and auxiliary costs, and psi."""
    if not archive:
        raise DataError('the contract phase needs an archive', 'archive')
    available = min(len(year) for year in archive) // hours_per_week
    n_weeks = available if n_weeks is None else n_weeks
    if not 1 <= n_weeks <= available:
        raise DataError(
            f'archive covers {available} weeks, asked for {n_weeks}', 'archive'
        )
    hourly = historical_scenarios(archive, 0, n_weeks * hours_per_week, hours_per_week)
    fuel = hourly.expected().scenarios[0].fuel_price
    weekly = hourly.with_fuel_price(fuel).to_weekly()
    mean = weekly.expected().scenarios[0]
    net_elec, aux_cost = derive_cost_series(
        mean.elec_price, mean.fuel_price, plant.cost, plant.aux
    )
    return ContractInputs(weekly, net_elec, aux_cost, incentive_schedule(weekly))


def solve_contract_phase(
    plant: PlantConfig,
    contracts: Sequence[ContractSpec],
    archive: Sequence[YearSeries],
    solver,
    n_weeks: int | None = None,
    hours_per_week: int = config.HOURS_PER_WEEK,
    expected_value: bool = False,
) -> ContractPhase:
    inputs = contract_inputs(plant, archive, n_weeks, hours_per_week)
    weekly = inputs.weekly.expected() if expected_value else inputs.weekly
    model, index = build_contract_model(
        plant, contracts, weekly, inputs.net_elec_cost, inputs.aux_cost, inputs.psi
    )
    if expected_value:
        model.name = 'contracts_ev'
    result = solver.solve_optimal(model, 'contract selection')
    plan = extract_contract_plan(index, result, contracts, hours_per_week)
    return ContractPhase(
        plan, float(result.objective), result.runtime, model_stats(model), inputs
    )


def run_contract_phase(
    plant: PlantConfig,
    contracts: Sequence[ContractSpec],
    archive: Sequence[YearSeries],
    solver,
    n_weeks: int | None = None,
    hours_per_week: int = config.HOURS_PER_WEEK,
    expected_value: bool = False,
) -> ContractPlan:
    return solve_contract_phase(
        plant, contracts, archive, solver, n_weeks, hours_per_week, expected_value
    ).plan


def recent_history(
    archive: Sequence[YearSeries], sample: YearSeries, week: int, hours_per_week: int
) -> YearSeries:
    """Newest archive year followed by the sample observations before `week`."""
    observed = sample.window(0, week * hours_per_week)
    latest = archive[-1]
    return YearSeries(
        f'{sample.label}@{week + 1}',
        np.concatenate([latest.demand, observed.demand]),
        np.concatenate([latest.elec_price, observed.elec_price]),
        np.concatenate([latest.fuel_price, observed.fuel_price]),
    )


def run_receding_year(
    plant: PlantConfig,
    contracts: Sequence[ContractSpec],
    plan: ContractPlan,
    sample: YearSeries,
    method: str,
    horizon: int,
    seed: int,
    archive: Sequence[YearSeries],
    solver,
    n_weeks: int | None = None,
    hours_per_week: int = config.HOURS_PER_WEEK,
    n_paths: int = config.N_PATHS,
    k: int = config.N_REPRESENTATIVES,
    fit_weeks: int = config.FIT_WINDOW_WEEKS,
    expected_value: bool = False,
    state: SystemState | None = None,
) -> YearResult:
    """Plan, commit and realize one week at a time over the sample."""
    if not 1 <= horizon <= config.MAX_HORIZON_WEEKS:
        raise DataError(
            f'horizon must be in [1, {config.MAX_HORIZON_WEEKS}] weeks, got {horizon}',
            'horizon',
        )
    H = hours_per_week
    available = min(len(sample) // H, plan.n_weeks)
    n_weeks = available if n_weeks is None else n_weeks
    if not 1 <= n_weeks <= available:
        raise DataError(
            f'sample and plan cover {available} weeks, asked for {n_weeks}',
            sample.label,
        )
    state = state or SystemState.initial(plant)
    remaining_up = np.array(plan.up)
    remaining_down = np.array(plan.down)

    weeks, runtimes, sizes = [], [], {}
    for week in range(n_weeks):
        window = min(horizon, n_weeks - week)
        recent = recent_history(archive, sample, week, H) if method != 'P' else None
        try:
            scenarios = build_scenario_set(
                method,
                archive,
                recent,
                week,
                window,
                sub_seed(seed, week),
                n_paths=n_paths,
                k=k,
                hours_per_week=H,
                fit_weeks=fit_weeks,
            )
            if expected_value:
                scenarios = scenarios.expected()
            model, index = build_operational_model(
                plant,
                contracts,
                plan,
                week,
                scenarios,
                state,
                remaining_up,
                remaining_down,
            )
            label = f'operational-{window}w'
            if label not in sizes:
                sizes[label] = model_stats(model)
            what = f'operational model of week {week + 1}'
            planned = solver.solve_optimal(model, what)
            decisions = extract_week_decisions(index, planned)
            decisions.validate(plan, week, plant.biomass_storage.delivery_gap)
            realized = sample.window(week * H, (week + 1) * H).as_scenario()
            result, actual = realize_week(
                plant,
                contracts,
                plan,
                week,
                decisions,
                realized,
                state,
                solver,
                planned_objective=planned.objective,
            )
        except SolverError as e:
            failure = SolverError(f'week {week + 1}: {e}')
            failure.dump_path = e.dump_path
            raise failure from e
        except PlannerError as e:
            raise type(e)(f'week {week + 1}: {e}') from e

        # committed option usage is gone for good
        for j, cid in enumerate(decisions.contract_ids):
            row = plan.position(cid)
            used_up = decisions.up[j].sum()
            remaining_up[row, week] = max(remaining_up[row, week] - used_up, 0.0)
            remaining_down[row, week] = max(
                remaining_down[row, week] - decisions.down[j].sum(), 0.0
            )
        runtimes.append(Runtime('operational', week + 1, planned.runtime))
        runtimes.append(Runtime('realization', week + 1, actual.runtime))
        weeks.append(result)
        state = result.end_state

    year = YearResult(
        sample=sample.label,
        method=method,
        horizon=horizon,
        seed=seed,
        expected_value=expected_value,
        plan=plan,
        weeks=tuple(weeks),
        runtimes=tuple(runtimes),
        model_sizes=tuple(sizes.items()),
    )
    logger.info(
        f'{year.configuration} on {sample.label}: total {year.total:.2f}, '
        f'penalties {year.total_penalty:.2f}, missed {year.missed_heat:.2f} MWh'
    )
    return year


def run_expected_value_baseline(
    plant: PlantConfig,
    contracts: Sequence[ContractSpec],
    archive: Sequence[YearSeries],
    sample: YearSeries,
    horizon: int,
    solver,
    seed: int = 0,
    method: str = 'P',
    n_weeks: int | None = None,
    hours_per_week: int = config.HOURS_PER_WEEK,
    **kwargs,
) -> YearResult:
    """Both phases on the probability-weighted expected scenario."""
    phase = solve_contract_phase(
        plant,
        contracts,
        archive,
        solver,
        hours_per_week=hours_per_week,
        expected_value=True,
    )
    return run_receding_year(
        plant,
        contracts,
        phase.plan,
        sample,
        method,
        horizon,
        seed,
        archive,
        solver,
        n_weeks=n_weeks,
        hours_per_week=hours_per_week,
        expected_value=True,
        **kwargs,
    )


class RunSummary(Protocol):
    """Anything with a sample label, a configuration kind and a total cost."""

    @property
    def sample(self) -> str: ...

    @property
    def expected_value(self) -> bool: ...

    @property
    def total(self) -> float: ...


def _delta(sto: float, exp: float) -> float:
    if exp == 0:
        return 0.0 if sto == 0 else float('nan')
    return 100.0 * (exp - sto) / exp


def compare_runs(results: Sequence[RunSummary]) -> pd.DataFrame:
    """Per sample: max, min and average totals of stochastic and expected-value runs.

    Deltas are (Exp - Sto) / Exp in percent; the last row averages the totals
    over all samples and recomputes the deltas from those averages.
    """
    if len(results) < 2:
        raise DataError('comparison needs at least two results', 'results')
    sto = [r for r in results if not r.expected_value]
    exp = [r for r in results if r.expected_value]
    if not sto or not exp:
        raise DataError(
            'comparison needs stochastic and expected-value runs', 'results'
        )
    sto_samples = list(dict.fromkeys(r.sample for r in sto))
    if set(sto_samples) != {r.sample for r in exp}:
        raise DataError(
            'stochastic and expected-value runs cover different samples', 'results'
        )

    rows = []
    for sample in sto_samples:
        a = np.array([r.total for r in sto if r.sample == sample])
        b = np.array([r.total for r in exp if r.sample == sample])
        rows.append((sample, a.max(), b.max(), a.min(), b.min(), a.mean(), b.mean()))
    means = np.array([row[1:] for row in rows]).mean(axis=0)
    rows.append(('average', *means))

    table = []
    for sample, smax, emax, smin, emin, savg, eavg in rows:
        table.append(
            (
                sample,
                smax,
                emax,
                _delta(smax, emax),
                smin,
                emin,
                _delta(smin, emin),
                savg,
                eavg,
                _delta(savg, eavg),
            )
        )
    return pd.DataFrame(table, columns=COMPARISON_COLUMNS)


def best_by_method(results: Sequence[YearResult]) -> pd.DataFrame:
    """Lowest total over horizon lengths per sample, method and configuration kind."""
    columns = ['sample', 'method', 'expected_value', 'horizon', 'total']
    frame = pd.DataFrame(
        [(r.sample, r.method, r.expected_value, r.horizon, r.total) for r in results],
        columns=columns,
    )
    if frame.empty:
        return frame
    keys = ['sample', 'method', 'expected_value']
    best = frame.loc[frame.groupby(keys)['total'].idxmin()]
    return best.sort_values(keys).reset_index(drop=True)


@dtc.dataclass(frozen=True)
class RunJob:
    sample: YearSeries
    method: str
    horizon: int
    seed: int
    expected_value: bool = False


async def run_many(
    plant: PlantConfig,
    contracts: Sequence[ContractSpec],
    plans: dict[bool, ContractPlan],
    archive: Sequence[YearSeries],
    jobs: Sequence[RunJob],
    solver,
    concurrency: int = 4,
    **kwargs,
) -> list[YearResult]:
    """Independent year runs side by side; `plans` maps expected_value to its plan."""
    gate = asyncio.Semaphore(concurrency)

    async def one(job: RunJob) -> YearResult:
        async with gate:
            return await asyncio.to_thread(
                run_receding_year,
                plant,
                contracts,
                plans[job.expected_value],
                job.sample,
                job.method,
                job.horizon,
                job.seed,
                archive,
                solver,
                expected_value=job.expected_value,
                **kwargs,
            )

    return list(await asyncio.gather(*(one(job) for job in jobs)))
