"""Scenario sets for the contract and operational models.

Methods: P (historical years), F1 (forecast week one, history afterwards),
F2 (forecast the whole window) and the unions P+F1, P+F2.
"""

import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from chpplan import config
from chpplan.domain.timeseries import Resolution
from chpplan.domain.timeseries import Scenario
from chpplan.domain.timeseries import ScenarioSet
from chpplan.domain.timeseries import TimeGrid
from chpplan.domain.timeseries import YearSeries
from chpplan.errors import DataError

from .armax import fit_armax
from .kmedoid import reduce_k_medoid
from .montecarlo import simulate_paths
from .montecarlo import sub_seed

logger = logging.getLogger('scengen')

# sub-seed purposes
DEMAND_PATHS = 1
PRICE_PATHS = 2
CLUSTERING = 3

CSV_COLUMNS = [
    'scenario',
    'probability',
    'period',
    'demand',
    'elec_price',
    'fuel_price',
]


def _window(year: YearSeries, successor: YearSeries, start: int, n_hours: int):
    """Hours [start, start+n_hours) of `year`, continued into `successor`."""
    stop = start + n_hours
    if stop <= len(year):
        return year.window(start, stop)
    if stop > len(year) + len(successor):
        raise DataError(
            f'archive shorter than window: hours {start}..{stop} of {year.label}'
        )
    rest = successor.window(0, stop - len(year))
    head = year.window(start, len(year))
    return YearSeries(
        year.label,
        np.concatenate([head.demand, rest.demand]),
        np.concatenate([head.elec_price, rest.elec_price]),
        np.concatenate([head.fuel_price, rest.fuel_price]),
    )


def historical_scenarios(
    archive: Sequence[YearSeries],
    start: int,
    n_hours: int,
    hours_per_week: int = config.HOURS_PER_WEEK,
) -> ScenarioSet:
    """One scenario per archive year over the same calendar hours.

    Years are oldest first; a window running past the end of a year takes the
    following archive year's first hours, the newest year wraps onto itself.
    """
    probabilities = config.HISTORY_PROBABILITIES
    if len(archive) != len(probabilities):
        raise DataError(
            f'need exactly {len(probabilities)} archive years, got {len(archive)}',
            'archive',
        )
    if start < 0 or n_hours < 1:
        raise DataError(f'bad window start={start} n_hours={n_hours}', 'window')
    scenarios = []
    for i, (year, pi) in enumerate(zip(archive, probabilities)):
        successor = archive[i + 1] if i + 1 < len(archive) else year
        window = _window(year, successor, start, n_hours)
        scenarios.append(window.as_scenario(pi))
    return ScenarioSet(
        TimeGrid(Resolution.HOURLY, n_hours, hours_per_week), tuple(scenarios)
    )


def _nearest_year(
    trajectory: Scenario, candidates: ScenarioSet, hours: int
) -> int:
    """Index of the candidate closest over the first `hours`; ties go to the newest."""
    blocks, targets = [], []
    for quantity in ('demand', 'elec_price'):
        matrix = candidates.matrix(quantity)[:, :hours]
        std = matrix.std()
        scale = std if std > 0 else 1.0
        blocks.append(matrix / scale)
        targets.append(getattr(trajectory, quantity)[:hours] / scale)
    features = np.hstack(blocks)
    target = np.concatenate(targets)
    dist = np.linalg.norm(features - target, axis=1)
    best = len(dist) - 1
    for i in range(len(dist) - 2, -1, -1):
        if dist[i] < dist[best]:
            best = i
    return best


def _forecast(
    recent: YearSeries,
    horizon: int,
    seed: int,
    n_paths: int,
    k: int,
    fuel: np.ndarray,
    hours_per_week: int,
    fit_weeks: int,
) -> ScenarioSet:
    if recent is None:
        raise DataError('forecast methods need recent observations', 'recent')
    window = min(len(recent), fit_weeks * hours_per_week)
    window -= window % hours_per_week
    if window < config.MIN_FIT_WEEKS * hours_per_week:
        raise DataError(
            f'{len(recent)} recent observations, forecasting needs '
            f'{config.MIN_FIT_WEEKS * hours_per_week}',
            'recent',
        )
    history = recent.window(len(recent) - window, len(recent))
    # the forecast starts on a week boundary at cycle index 0
    demand_model = fit_armax(
        history.demand, start_index=-window, period=hours_per_week
    )
    price_model = fit_armax(
        history.elec_price, start_index=-window, period=hours_per_week
    )
    bundle = simulate_paths(
        demand_model, horizon, n_paths, sub_seed(seed, DEMAND_PATHS), 'demand'
    ).join(
        simulate_paths(
            price_model, horizon, n_paths, sub_seed(seed, PRICE_PATHS), 'elec_price'
        )
    )
    return reduce_k_medoid(
        bundle,
        k,
        seed=sub_seed(seed, CLUSTERING),
        fill={'fuel_price': fuel[:horizon]},
        hours_per_week=hours_per_week,
    )


def _extend_with_history(
    week_one: ScenarioSet, continuation: ScenarioSet, history_week_one: ScenarioSet
) -> ScenarioSet:
    hours = week_one.grid.n_periods
    newest = len(continuation) - 1
    extended = []
    for rank, s in enumerate(week_one):
        if rank == 0:
            # the most probable forecast is continued with the latest year
            year = newest
        else:
            year = _nearest_year(s, history_week_one, hours)
        tail = continuation.scenarios[year]
        extended.append(
            Scenario(
                s.probability,
                np.concatenate([s.demand, tail.demand]),
                np.concatenate([s.elec_price, tail.elec_price]),
                np.concatenate([s.fuel_price, tail.fuel_price]),
                label=f'{s.label}+{tail.label}',
            )
        )
    grid = TimeGrid(
        Resolution.HOURLY,
        hours + continuation.grid.n_periods,
        week_one.grid.hours_per_week,
    )
    return ScenarioSet(grid, tuple(extended))


def build_scenario_set(
    method: str,
    archive: Sequence[YearSeries],
    recent: YearSeries | None,
    week: int,
    horizon_weeks: int,
    seed: int,
    n_paths: int = config.N_PATHS,
    k: int = config.N_REPRESENTATIVES,
    hours_per_week: int = config.HOURS_PER_WEEK,
    fit_weeks: int = config.FIT_WINDOW_WEEKS,
) -> ScenarioSet:
    """Hourly scenarios for weeks [week, week + horizon_weeks), `week` 0-based.

    `recent` holds the observations up to the start of `week`, newest last.
    The fuel price is the probability-weighted historical expectation in
    every method.
    """
    if method not in config.SCENARIO_METHODS:
        raise DataError(
            f'unknown method {method!r}, expected one of {config.SCENARIO_METHODS}',
            'method',
        )
    if horizon_weeks < 1:
        raise DataError('horizon must cover at least one week', 'horizon_weeks')
    start = week * hours_per_week
    n_hours = horizon_weeks * hours_per_week

    history = historical_scenarios(archive, start, n_hours, hours_per_week)
    fuel = history.expected().scenarios[0].fuel_price
    history = history.with_fuel_price(fuel)
    if method == 'P':
        return history

    base = method.removeprefix('P+')
    if base == 'F2':
        forecast = _forecast(
            recent, n_hours, seed, n_paths, k, fuel, hours_per_week, fit_weeks
        )
    else:
        forecast = _forecast(
            recent, hours_per_week, seed, n_paths, k, fuel, hours_per_week, fit_weeks
        )
        if horizon_weeks > 1:
            continuation = historical_scenarios(
                archive, start + hours_per_week, n_hours - hours_per_week,
                hours_per_week,
            ).with_fuel_price(fuel[hours_per_week:])
            week_one = historical_scenarios(
                archive, start, hours_per_week, hours_per_week
            )
            forecast = _extend_with_history(forecast, continuation, week_one)

    logger.debug(
        f'{method} scenarios for weeks {week + 1}..{week + horizon_weeks}: '
        f'probabilities {np.round(forecast.probabilities, 4).tolist()}'
    )
    if method.startswith('P+'):
        return history.union(forecast)
    return forecast


def export_scenarios(scenarios: ScenarioSet, path: str | Path):
    rows = []
    for i, s in enumerate(scenarios):
        frame = pd.DataFrame(
            {
                'scenario': s.label or str(i),
                'probability': s.probability,
                'period': np.arange(1, len(s) + 1),
                'demand': s.demand,
                'elec_price': s.elec_price,
                'fuel_price': s.fuel_price,
            }
        )
        rows.append(frame)
    table = pd.concat(rows, ignore_index=True) if rows else pd.DataFrame(
        columns=CSV_COLUMNS
    )
    table.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')


def import_scenarios(
    path: str | Path,
    resolution: Resolution = Resolution.HOURLY,
    hours_per_week: int = config.HOURS_PER_WEEK,
) -> ScenarioSet:
    try:
        table = pd.read_csv(
            path, dtype={'scenario': str}, float_precision='round_trip'
        )
    except FileNotFoundError:
        raise DataError('scenario file not found', str(path)) from None
    if list(table.columns) != CSV_COLUMNS:
        raise DataError(f'expected columns {",".join(CSV_COLUMNS)}', str(path))
    scenarios = []
    for label, group in table.groupby('scenario', sort=False):
        group = group.sort_values('period')
        scenarios.append(
            Scenario(
                float(group['probability'].iloc[0]),
                group['demand'].to_numpy(),
                group['elec_price'].to_numpy(),
                group['fuel_price'].to_numpy(),
                label=str(label),
            )
        )
    if not scenarios:
        raise DataError('scenario file holds no rows', str(path))
    grid = TimeGrid(resolution, len(scenarios[0]), hours_per_week)
    return ScenarioSet(grid, tuple(scenarios))
