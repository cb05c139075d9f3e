import numpy as np
import pytest as pt

from chpplan.domain.params import AuxBoilerParams
from chpplan.domain.params import CostParams
from chpplan.domain.timeseries import Resolution
from chpplan.domain.timeseries import Scenario
from chpplan.domain.timeseries import ScenarioSet
from chpplan.domain.timeseries import SystemState
from chpplan.domain.timeseries import TimeGrid
from chpplan.domain.timeseries import YearSeries
from chpplan.domain.timeseries import aggregate_to_weekly
from chpplan.domain.timeseries import clip_outliers
from chpplan.domain.timeseries import derive_cost_series
from chpplan.domain.timeseries import expand_daily_to_hourly
from chpplan.domain.timeseries import incentive_schedule
from chpplan.domain.timeseries import trim_to_year
from chpplan.errors import DataError


def flat(value: float, n: int) -> np.ndarray:
    return np.full(n, float(value))


def test_grid_partitions_hours_into_weeks():
    grid = TimeGrid.hourly(2, hours_per_week=4)
    assert grid.n_periods == 8
    assert grid.n_weeks == 2
    assert list(grid.periods_of(1)) == [4, 5, 6, 7]
    assert grid.week_of(3) == 0
    assert grid.week_of(4) == 1
    weekly = TimeGrid.weekly(52)
    assert weekly.periods_per_week == 1
    assert list(weekly.periods_of(51)) == [51]


def test_hourly_grid_must_hold_whole_weeks():
    with pt.raises(DataError, match='unit mismatch'):
        TimeGrid(Resolution.HOURLY, 170)


def test_scenario_set_checks_probabilities_and_lengths():
    grid = TimeGrid.weekly(3)
    a = Scenario(0.5, flat(1, 3), flat(0, 3), flat(0, 3))
    with pt.raises(DataError, match='sum of probabilities'):
        ScenarioSet(grid, (a,))
    short = Scenario(0.5, flat(1, 2), flat(0, 2), flat(0, 2))
    with pt.raises(DataError, match='unit mismatch'):
        ScenarioSet(grid, (a, short))


def test_scenario_invariants():
    with pt.raises(DataError, match='probability'):
        Scenario(0.0, [1.0], [1.0], [1.0])
    with pt.raises(DataError, match='demand >= 0'):
        Scenario(1.0, [-1.0], [1.0], [1.0])
    with pt.raises(DataError, match='non-finite'):
        Scenario(1.0, [np.nan], [1.0], [1.0])


def test_series_are_read_only():
    s = Scenario(1.0, [1.0, 2.0], [0.0, 0.0], [0.0, 0.0])
    with pt.raises(ValueError):
        s.demand[0] = 5.0


def test_expected_is_probability_weighted():
    grid = TimeGrid.weekly(2)
    a = Scenario(0.25, [0, 4], [10, 10], [1, 1])
    b = Scenario(0.75, [4, 8], [20, 30], [1, 1])
    mean = ScenarioSet(grid, (a, b)).expected().scenarios[0]
    assert mean.probability == 1.0
    assert mean.demand.tolist() == [3.0, 7.0]
    assert mean.elec_price.tolist() == [17.5, 25.0]


def test_union_renormalizes():
    grid = TimeGrid.weekly(1)
    a = ScenarioSet(grid, (Scenario(1.0, [1], [0], [0]),))
    b = ScenarioSet(
        grid, (Scenario(0.5, [2], [0], [0]), Scenario(0.5, [3], [0], [0]))
    )
    joined = a.union(b)
    assert len(joined) == 3
    assert joined.probabilities.tolist() == [0.5, 0.25, 0.25]


def test_to_weekly_sums_demand_and_averages_prices():
    hourly = ScenarioSet(
        TimeGrid.hourly(2, hours_per_week=3),
        (Scenario(1.0, [1, 2, 3, 4, 5, 6], [1, 2, 3, 3, 3, 3], flat(7, 6)),),
    )
    weekly = hourly.to_weekly()
    assert weekly.grid == TimeGrid.weekly(2, hours_per_week=3)
    s = weekly.scenarios[0]
    assert s.demand.tolist() == [6.0, 15.0]
    assert s.elec_price.tolist() == [2.0, 3.0]
    assert s.fuel_price.tolist() == [7.0, 7.0]


def test_aggregate_rejects_partial_weeks():
    with pt.raises(DataError, match='not a multiple'):
        aggregate_to_weekly(flat(1, 10), 'demand', hours_per_week=4)
    with pt.raises(DataError, match='unknown series kind'):
        aggregate_to_weekly(flat(1, 8), 'volume', hours_per_week=4)


def test_derive_cost_series():
    cost = CostParams(
        chp_op=19.85,
        startup=0,
        shutdown=0,
        elec_tax=55.62,
        biomass_incentive=20.25,
        biomass_share_target=0.5,
        penalty_store=0,
        penalty_miss=0,
        penalty_bm=0,
    )
    aux = AuxBoilerParams(q_max=15, eff=0.97, om_cost=0.07, tax=28.22, co2_tax=6.34)
    net_elec, aux_cost = derive_cost_series([30.0, -5.0], [20.0, 21.0], cost, aux)
    assert net_elec.tolist() == pt.approx([55.62 - 20.25 - 30.0, 55.62 - 20.25 + 5.0])
    assert aux_cost.tolist() == pt.approx([20.0 + 34.63, 21.0 + 34.63])
    with pt.raises(DataError):
        derive_cost_series([], [], cost, aux)


def test_incentive_schedule_ranks_spread():
    grid = TimeGrid.weekly(3)
    s1 = Scenario(0.5, [0, 0, 0], [0, 0, 0], [0, 0, 0])
    s2 = Scenario(0.5, [1, 10, 5], [0, 0, 0], [0, 0, 0])
    psi = incentive_schedule(ScenarioSet(grid, (s1, s2)))
    assert psi.round(2).tolist() == [5.0, 5.2, 5.1]


def test_incentive_schedule_floor_and_ties():
    n = 60
    grid = TimeGrid.weekly(n)
    s = Scenario(1.0, flat(1, n), flat(0, n), flat(0, n))
    psi = incentive_schedule(ScenarioSet(grid, (s,)))
    # no spread anywhere: earlier weeks rank first
    assert psi[0] == 5.2
    assert psi[1] == pt.approx(5.1)
    assert psi.min() == 0.1
    assert np.all(np.diff(psi) <= 0)


def test_incentive_schedule_needs_weekly_grid():
    hourly = ScenarioSet(
        TimeGrid.hourly(1, hours_per_week=2), (Scenario(1.0, [1, 1], [0, 0], [0, 0]),)
    )
    with pt.raises(DataError, match='weekly grid'):
        incentive_schedule(hourly)


def test_trim_expand_and_clip():
    assert trim_to_year(np.arange(10.0), n_hours=6).tolist() == [0, 1, 2, 3, 4, 5]
    with pt.raises(DataError, match='a year needs'):
        trim_to_year(np.arange(3.0), n_hours=6)
    hourly = expand_daily_to_hourly([1.0, 2.0])
    assert hourly.shape == (48,)
    assert hourly[23] == 1.0
    assert hourly[24] == 2.0
    values = np.concatenate([np.zeros(999), [1000.0]])
    clipped = clip_outliers(values)
    bound = values.mean() + 4 * values.std()
    assert clipped.max() == pt.approx(bound)
    assert clipped[:999].tolist() == values[:999].tolist()


def test_system_state_invariants():
    with pt.raises(DataError, match='chp_power = 0'):
        SystemState(10.0, 0.0, chp_on=False, chp_power=3.0, hours_in_state=1)
    with pt.raises(DataError, match='biomass_level'):
        SystemState(-1.0, 0.0, chp_on=False, chp_power=0.0, hours_in_state=1)
    state = SystemState(10.0, 8.0, chp_on=True, chp_power=3.0, hours_in_state=1)
    with pt.raises(DataError, match='thermal_level'):
        state.check_thermal(0.0, 7.0)
    with pt.raises(DataError, match='hours since delivery of S'):
        SystemState(10.0, 0.0, False, 0.0, 1, hours_since_delivery={'S': 0})
    assert SystemState(10.0, 0.0, False, 0.0, 1).hours_since_delivery == {}


def test_year_series_window():
    year = YearSeries('2014', np.arange(6.0), flat(1, 6), flat(2, 6))
    part = year.window(2, 4)
    assert part.label == '2014'
    assert part.demand.tolist() == [2.0, 3.0]
    assert part.as_scenario(0.5).probability == 0.5
    with pt.raises(DataError, match='differ in length'):
        YearSeries('x', [1.0], [1.0, 2.0], [1.0])
