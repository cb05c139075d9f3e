import numpy as np
import pytest as pt

from chpplan import config
from chpplan.domain.timeseries import Resolution
from chpplan.domain.timeseries import YearSeries
from chpplan.errors import DataError
from chpplan.scengen.methods import build_scenario_set
from chpplan.scengen.methods import export_scenarios
from chpplan.scengen.methods import historical_scenarios
from chpplan.scengen.methods import import_scenarios

HPW = 24
N_WEEKS = 12


def noisy_year(label: str, seed: int, n_hours: int = N_WEEKS * HPW) -> YearSeries:
    rng = np.random.default_rng(seed)
    t = np.arange(n_hours)
    demand = 10 + 3 * np.sin(2 * np.pi * t / HPW) + rng.standard_normal(n_hours)
    price = 30 + 5 * np.cos(2 * np.pi * t / HPW) + rng.standard_normal(n_hours)
    fuel = np.full(n_hours, 20.0 + seed)
    return YearSeries(label, np.clip(demand, 0, None), price, fuel)


def archive():
    return [noisy_year(str(2011 + i), i) for i in range(5)]


def recent():
    return noisy_year('recent', 99, n_hours=8 * HPW)


def build(method, horizon=2, seed=1, **kwargs):
    return build_scenario_set(
        method,
        archive(),
        recent(),
        week=3,
        horizon_weeks=horizon,
        seed=seed,
        n_paths=200,
        k=5,
        hours_per_week=HPW,
        **kwargs,
    )


def test_historical_scenarios_use_fixed_weights():
    years = archive()
    p = build('P')
    assert p.grid.resolution is Resolution.HOURLY
    assert p.grid.n_periods == 2 * HPW
    assert p.probabilities.tolist() == list(config.HISTORY_PROBABILITIES)
    for s, year in zip(p, years):
        assert np.array_equal(s.demand, year.demand[3 * HPW : 5 * HPW])
    expected_fuel = np.dot(config.HISTORY_PROBABILITIES, [20.0 + i for i in range(5)])
    for s in p:
        assert s.fuel_price == pt.approx(np.full(2 * HPW, expected_fuel))


def test_window_past_year_end_takes_the_next_year():
    years = [noisy_year(str(i), i, n_hours=2 * HPW) for i in range(5)]
    hist = historical_scenarios(years, HPW, 2 * HPW, HPW)
    first, newest = hist.scenarios[0], hist.scenarios[-1]
    assert np.array_equal(first.demand[:HPW], years[0].demand[HPW:])
    assert np.array_equal(first.demand[HPW:], years[1].demand[:HPW])
    assert np.array_equal(newest.demand[HPW:], years[4].demand[:HPW])


def test_archive_must_hold_five_years():
    with pt.raises(DataError, match='need exactly 5'):
        historical_scenarios(archive()[:4], 0, HPW, HPW)


def test_f2_reduces_to_k_scenarios():
    f2 = build('F2')
    assert len(f2) == 5
    assert f2.grid.n_periods == 2 * HPW
    assert f2.probabilities.sum() == pt.approx(1.0, abs=1e-12)
    assert all(s.label.startswith('path') for s in f2)


def test_same_seed_same_scenarios():
    a, b = build('F2', seed=4), build('F2', seed=4)
    assert np.array_equal(a.matrix('demand'), b.matrix('demand'))
    assert a.probabilities.tolist() == b.probabilities.tolist()
    c = build('F2', seed=5)
    assert not np.array_equal(a.matrix('demand'), c.matrix('demand'))


def test_f1_continues_with_history():
    years = archive()
    f1 = build('F1')
    assert len(f1) == 5
    # the most probable forecast is continued with the newest year
    top = f1.scenarios[0]
    assert np.array_equal(top.demand[HPW:], years[-1].demand[4 * HPW : 5 * HPW])
    tails = [y.demand[4 * HPW : 5 * HPW] for y in years]
    for s in f1:
        assert any(np.array_equal(s.demand[HPW:], tail) for tail in tails)


def test_union_methods_renormalize():
    both = build('P+F2')
    assert len(both) == 10
    assert both.probabilities.sum() == pt.approx(1.0, abs=1e-12)
    assert both.probabilities[:5] == pt.approx(
        [p / 2 for p in config.HISTORY_PROBABILITIES]
    )


def test_bad_requests():
    with pt.raises(DataError, match='unknown method'):
        build('F3')
    with pt.raises(DataError, match='at least one week'):
        build('P', horizon=0)
    with pt.raises(DataError, match='recent observations'):
        build_scenario_set('F2', archive(), None, 3, 1, 1, hours_per_week=HPW)


def test_export_and_import(tmp_path):
    p = build('P')
    path = tmp_path / 'scenarios.csv'
    export_scenarios(p, path)
    back = import_scenarios(path, hours_per_week=HPW)
    assert [s.label for s in back] == [s.label for s in p]
    assert np.array_equal(back.matrix('demand'), p.matrix('demand'))
    assert np.array_equal(back.matrix('elec_price'), p.matrix('elec_price'))
    assert tuple(back.probabilities) == tuple(p.probabilities)
    path.write_text('scenario,probability\n0,1\n')
    with pt.raises(DataError, match='expected columns'):
        import_scenarios(path)
