import dataclasses as dtc
import enum
import logging
from collections.abc import Mapping
from collections.abc import Sequence

import numpy as np

from chpplan import config
from chpplan.errors import DataError

from .params import AuxBoilerParams
from .params import CostParams

logger = logging.getLogger('domain')

PROBABILITY_TOL = 1e-9


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise DataError(f'expected a 1-d series, got shape {arr.shape}', name)
    if not np.all(np.isfinite(arr)):
        raise DataError('series contains missing or non-finite values', name)
    arr.flags.writeable = False
    return arr


class Resolution(enum.Enum):
    WEEKLY = 'weekly'
    HOURLY = 'hourly'


@dtc.dataclass(frozen=True)
class TimeGrid:
    resolution: Resolution
    n_periods: int
    hours_per_week: int = config.HOURS_PER_WEEK

    def __post_init__(self):
        if self.n_periods < 1 or self.hours_per_week < 1:
            raise DataError('grid needs at least one period', 'grid')
        if (
            self.resolution is Resolution.HOURLY
            and self.n_periods % self.hours_per_week
        ):
            raise DataError(
                f'unit mismatch: hourly grid of {self.n_periods} periods is not '
                f'a whole number of {self.hours_per_week}-hour weeks',
                'grid',
            )

    @classmethod
    def hourly(cls, n_weeks: int, hours_per_week: int = config.HOURS_PER_WEEK):
        return cls(Resolution.HOURLY, n_weeks * hours_per_week, hours_per_week)

    @classmethod
    def weekly(cls, n_weeks: int, hours_per_week: int = config.HOURS_PER_WEEK):
        return cls(Resolution.WEEKLY, n_weeks, hours_per_week)

    @property
    def n_weeks(self) -> int:
        if self.resolution is Resolution.WEEKLY:
            return self.n_periods
        return self.n_periods // self.hours_per_week

    @property
    def periods_per_week(self) -> int:
        return 1 if self.resolution is Resolution.WEEKLY else self.hours_per_week

    def week_of(self, period: int) -> int:
        """0-based week of 0-based `period`."""
        return period // self.periods_per_week

    def periods_of(self, week: int) -> range:
        """0-based periods of 0-based `week` (the T_w partition)."""
        n = self.periods_per_week
        return range(week * n, (week + 1) * n)


@dtc.dataclass(frozen=True)
class Scenario:
    probability: float
    demand: np.ndarray
    elec_price: np.ndarray
    fuel_price: np.ndarray
    label: str = ''

    def __post_init__(self):
        for name in ('demand', 'elec_price', 'fuel_price'):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), name))
        if not 0 < self.probability <= 1 + PROBABILITY_TOL:
            raise DataError(
                f'invariant probability in (0, 1] violated ({self.probability})',
                'probability',
            )
        if np.any(self.demand < 0):
            raise DataError('invariant demand >= 0 violated', 'demand')
        if not len(self.demand) == len(self.elec_price) == len(self.fuel_price):
            raise DataError('all series of a scenario must share one length')

    def __len__(self):
        return len(self.demand)

    def with_probability(self, probability: float) -> 'Scenario':
        return dtc.replace(self, probability=probability)

    def window(self, start: int, stop: int) -> 'Scenario':
        return dtc.replace(
            self,
            demand=self.demand[start:stop],
            elec_price=self.elec_price[start:stop],
            fuel_price=self.fuel_price[start:stop],
        )


@dtc.dataclass(frozen=True)
class ScenarioSet:
    grid: TimeGrid
    scenarios: tuple[Scenario, ...]

    def __post_init__(self):
        object.__setattr__(self, 'scenarios', tuple(self.scenarios))
        if not self.scenarios:
            raise DataError('a scenario set needs at least one scenario', 'scenarios')
        total = sum(s.probability for s in self.scenarios)
        if abs(total - 1.0) > PROBABILITY_TOL:
            raise DataError(
                f'invariant sum of probabilities = 1 violated ({total!r})',
                'scenarios',
            )
        for i, s in enumerate(self.scenarios):
            if len(s) != self.grid.n_periods:
                raise DataError(
                    f'unit mismatch: {len(s)} values on a '
                    f'{self.grid.resolution.value} grid of {self.grid.n_periods}',
                    f'scenarios[{i}]',
                )

    def __len__(self):
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([s.probability for s in self.scenarios])

    def matrix(self, quantity: str) -> np.ndarray:
        """(n_scenarios, n_periods) array of one quantity."""
        return np.vstack([getattr(s, quantity) for s in self.scenarios])

    def expected(self, label: str = 'expected') -> 'ScenarioSet':
        """Single scenario carrying the probability-weighted mean series."""
        pi = self.probabilities
        mean = {q: pi @ self.matrix(q) for q in ('demand', 'elec_price', 'fuel_price')}
        return ScenarioSet(self.grid, (Scenario(1.0, label=label, **mean),))

    def with_fuel_price(self, fuel_price: np.ndarray) -> 'ScenarioSet':
        return ScenarioSet(
            self.grid,
            tuple(dtc.replace(s, fuel_price=fuel_price) for s in self.scenarios),
        )

    def union(self, other: 'ScenarioSet') -> 'ScenarioSet':
        """Both sets side by side, probabilities renormalized to one."""
        if other.grid != self.grid:
            raise DataError('cannot join scenario sets on different grids', 'grid')
        members = self.scenarios + other.scenarios
        total = sum(s.probability for s in members)
        return ScenarioSet(
            self.grid, tuple(s.with_probability(s.probability / total) for s in members)
        )

    def to_weekly(self) -> 'ScenarioSet':
        if self.grid.resolution is Resolution.WEEKLY:
            return self
        hpw = self.grid.hours_per_week
        weekly = []
        for s in self.scenarios:
            weekly.append(
                Scenario(
                    s.probability,
                    aggregate_to_weekly(s.demand, 'demand', hpw),
                    aggregate_to_weekly(s.elec_price, 'price', hpw),
                    aggregate_to_weekly(s.fuel_price, 'price', hpw),
                    label=s.label,
                )
            )
        return ScenarioSet(TimeGrid.weekly(self.grid.n_weeks, hpw), tuple(weekly))


@dtc.dataclass(frozen=True)
class SystemState:
    """Week-boundary carry-over between receding-horizon steps.

    `hours_since_delivery` maps a contract id to the hours from its last
    delivery to the first hour of the next step (1: delivered in the last hour).
    Contracts without a recorded delivery are unconstrained.
    """

    biomass_level: float
    thermal_level: float
    chp_on: bool
    chp_power: float
    hours_in_state: int
    hours_since_delivery: Mapping[str, int] = dtc.field(default_factory=dict)

    def __post_init__(self):
        if self.biomass_level < -config.FEAS_TOL:
            raise DataError('invariant biomass_level >= 0 violated', 'biomass_level')
        if not self.chp_on and abs(self.chp_power) > config.FEAS_TOL:
            raise DataError(
                'invariant chp_on = false => chp_power = 0 violated', 'chp_power'
            )
        if self.hours_in_state < 0:
            raise DataError('hours_in_state must be >= 0', 'hours_in_state')
        for cid, hours in self.hours_since_delivery.items():
            if hours < 1:
                raise DataError(
                    f'hours since delivery of {cid} must be >= 1',
                    'hours_since_delivery',
                )

    def check_thermal(self, cap_min: float, cap_max: float):
        tol = config.FEAS_TOL
        if not cap_min - tol <= self.thermal_level <= cap_max + tol:
            raise DataError(
                f'invariant thermal_level in [{cap_min}, {cap_max}] violated',
                'thermal_level',
            )

    @classmethod
    def initial(cls, plant) -> 'SystemState':
        chp = plant.chp
        return cls(
            biomass_level=plant.biomass_storage.initial,
            thermal_level=plant.thermal_storage.initial,
            chp_on=False,
            chp_power=0.0,
            hours_in_state=max(chp.min_up, chp.min_down),
        )


@dtc.dataclass(frozen=True)
class YearSeries:
    """One labelled stretch of hourly demand and prices (archive year or sample)."""

    label: str
    demand: np.ndarray
    elec_price: np.ndarray
    fuel_price: np.ndarray

    def __post_init__(self):
        for name in ('demand', 'elec_price', 'fuel_price'):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), name))
        if not len(self.demand) == len(self.elec_price) == len(self.fuel_price):
            raise DataError('demand and price series differ in length', self.label)
        if np.any(self.demand < 0):
            raise DataError('invariant demand >= 0 violated', self.label)

    def __len__(self):
        return len(self.demand)

    def window(self, start: int, stop: int) -> 'YearSeries':
        return YearSeries(
            self.label,
            self.demand[start:stop],
            self.elec_price[start:stop],
            self.fuel_price[start:stop],
        )

    def as_scenario(self, probability: float = 1.0) -> Scenario:
        return Scenario(
            probability, self.demand, self.elec_price, self.fuel_price, self.label
        )


def derive_cost_series(
    elec_price: Sequence[float],
    fuel_price: Sequence[float],
    cost: CostParams,
    aux: AuxBoilerParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Net electricity cost L = T^EP - I - L^E and auxiliary cost C^AUX."""
    elec = np.asarray(elec_price, dtype=float)
    fuel = np.asarray(fuel_price, dtype=float)
    if elec.size == 0 or fuel.size == 0:
        raise DataError('cost series need at least one value')
    net_elec = cost.elec_tax - cost.biomass_incentive - elec
    aux_cost = fuel + aux.fixed_cost
    return net_elec, aux_cost


def incentive_schedule(weekly: ScenarioSet) -> np.ndarray:
    """Option incentive psi per week, highest where demand scenarios spread most.

    >>> import numpy as np
    >>> g = TimeGrid.weekly(3)
    >>> s1 = Scenario(0.5, [0, 0, 0], [0, 0, 0], [0, 0, 0])
    >>> s2 = Scenario(0.5, [1, 10, 5], [0, 0, 0], [0, 0, 0])
    >>> incentive_schedule(ScenarioSet(g, (s1, s2))).round(2).tolist()
    [5.0, 5.2, 5.1]
    """
    if weekly.grid.resolution is not Resolution.WEEKLY:
        raise DataError('incentive schedule needs a weekly grid', 'grid')
    demand = weekly.matrix('demand')
    spread = demand.max(axis=0) - demand.min(axis=0)
    # stable sort keeps earlier weeks first among ties
    order = np.argsort(-spread, kind='stable')
    psi = np.empty(len(spread))
    for rank, week in enumerate(order):
        value = round(config.INCENTIVE_MAX - config.INCENTIVE_STEP * rank, 10)
        psi[week] = max(value, config.INCENTIVE_MIN)
    logger.debug(f'incentive schedule spans [{psi.min()}, {psi.max()}]')
    return psi


def aggregate_to_weekly(
    hourly: Sequence[float], kind: str, hours_per_week: int = config.HOURS_PER_WEEK
) -> np.ndarray:
    """Weekly sums (demand) or means (price) over consecutive week blocks."""
    values = np.asarray(hourly, dtype=float)
    if values.size == 0 or values.size % hours_per_week:
        raise DataError(
            f'length {values.size} is not a multiple of {hours_per_week}', kind
        )
    blocks = values.reshape(-1, hours_per_week)
    if kind == 'demand':
        return blocks.sum(axis=1)
    if kind == 'price':
        return blocks.mean(axis=1)
    raise DataError(f'unknown series kind {kind!r}', 'kind')


def trim_to_year(values: Sequence[float], n_hours: int = config.HOURS_PER_YEAR):
    """Keep the first 52 weeks; a year shorter than that is an error."""
    arr = np.asarray(values, dtype=float)
    if arr.size < n_hours:
        raise DataError(f'series has {arr.size} hours, a year needs {n_hours}')
    if arr.size > n_hours:
        logger.debug(f'trimming {arr.size - n_hours} trailing hours')
    return arr[:n_hours]


def expand_daily_to_hourly(daily: Sequence[float]) -> np.ndarray:
    return np.repeat(np.asarray(daily, dtype=float), config.HOURS_PER_DAY)


def clip_outliers(values: Sequence[float], n_std: float = config.OUTLIER_STD):
    """Limit values to mean +/- n_std standard deviations."""
    arr = np.asarray(values, dtype=float)
    mean, std = arr.mean(), arr.std()
    return np.clip(arr, mean - n_std * std, mean + n_std * std)
