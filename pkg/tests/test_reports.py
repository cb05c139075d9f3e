import json

import numpy as np
import pandas as pd
import pytest as pt

from chpplan.domain.timeseries import SystemState
from chpplan.errors import DataError
from chpplan.orchestrator import Runtime
from chpplan.orchestrator import YearResult
from chpplan.orchestrator import compare_runs
from chpplan.phase2 import TRACE_COLUMNS
from chpplan.phase2 import WeekDecisions
from chpplan.phase2 import WeeklyResult
from chpplan.reports import OPTIONS_COLUMNS
from chpplan.reports import YEAR_COLUMNS
from chpplan.reports import RunRecord
from chpplan.reports import read_run
from chpplan.reports import write_reports
from chpplan.synthetic import spike_plan

HOURS = 4


def trace_row(t: int) -> tuple:
    arrived = int(t == 1)
    level = 100.0 - t
    return (t, 5.0, 0.0, 2.5, 5.0, 0.0, 0.0, level, 0.0, 1, arrived, 170.0 * arrived)


def toy_week(week: int, missed: float = 0.0) -> WeeklyResult:
    rows = [trace_row(t) for t in range(1, HOURS + 1)]
    trace = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    decisions = WeekDecisions(
        ('S',), [[1, 0, 0, 0]], [[170, 0, 0, 0]], [[10, 0, 0, 0]], np.zeros((1, HOURS))
    )
    return WeeklyResult(
        week=week,
        biomass=8500.0,
        chp_operating=10.0,
        startup_shutdown=0.0,
        electricity=25.0,
        auxiliary=0.0,
        inventory=0.4,
        penalty_miss=10000 * missed,
        penalty_excess=0.0,
        missed_heat=missed,
        excess_storage=0.0,
        end_state=SystemState(96.0, 0.0, True, 2.5, 1),
        trace=trace,
        decisions=decisions,
        planned_objective=8535.4,
    )


def toy_year(
    expected_value: bool = False, sample: str = '2016', seed: int = 1
) -> YearResult:
    return YearResult(
        sample=sample,
        method='P',
        horizon=2,
        seed=seed,
        expected_value=expected_value,
        plan=spike_plan(2),
        weeks=(toy_week(0), toy_week(1, missed=1.5)),
        runtimes=(Runtime('operational', 1, 0.25),),
    )


def test_year_reports(tmp_path):
    result = toy_year()
    written = write_reports(result, tmp_path)
    assert tmp_path / 'run.json' in written

    year = pd.read_csv(tmp_path / 'year_result.csv')
    assert list(year.columns) == YEAR_COLUMNS
    assert year['week'].tolist() == [1, 2]
    assert year['total'].tolist() == pt.approx([8535.4, 8535.4 + 15000])
    assert year['missed_heat'].tolist() == [0.0, 1.5]
    assert year['chp_on'].tolist() == [1, 1]

    options = pd.read_csv(tmp_path / 'options_usage.csv', dtype={'contract': str})
    assert list(options.columns) == OPTIONS_COLUMNS
    assert options.iloc[0].tolist() == [1, 'S', 170.0, 85.0, 0.0, 10.0, 0.0]
    assert options['used_up'].tolist() == [10.0, 10.0]
    assert options['B_up'].tolist() == [85.0, 85.0]

    storage = pd.read_csv(tmp_path / 'biomass_storage.csv')
    assert storage['deliveries'].tolist() == [1, 1]
    assert storage['delivered'].tolist() == [170.0, 170.0]
    assert (tmp_path / 'weekly' / 'week_02.csv').exists()
    assert pd.read_csv(tmp_path / 'runtimes.csv')['seconds'].tolist() == [0.25]

    record = read_run(tmp_path)
    assert record == RunRecord.of(result)
    assert record.total == pt.approx(result.total)


def test_reports_are_reproducible(tmp_path):
    write_reports(toy_year(), tmp_path / 'a')
    write_reports(toy_year(), tmp_path / 'b')
    names = ('year_result.csv', 'options_usage.csv', 'weekly/week_01.csv', 'run.json')
    for name in names:
        first, second = tmp_path / 'a' / name, tmp_path / 'b' / name
        assert first.read_bytes() == second.read_bytes()


def test_empty_results_write_headers_only(tmp_path):
    write_reports([], tmp_path)
    assert (tmp_path / 'year_result.csv').read_text() == ','.join(YEAR_COLUMNS) + '\n'
    header = ','.join(TRACE_COLUMNS) + '\n'
    assert (tmp_path / 'weekly' / 'week_00.csv').read_text() == header
    assert not (tmp_path / 'run.json').exists()


def test_several_runs_get_their_own_directories(tmp_path):
    write_reports([toy_year(), toy_year(expected_value=True)], tmp_path)
    sto = read_run(tmp_path / '2016_Sto-P-W2_s1')
    exp = read_run(tmp_path / '2016_Exp-P-W2_s1')
    assert (sto.expected_value, exp.expected_value) == (False, True)

    table = compare_runs([sto, exp])
    write_reports(table, tmp_path)
    comparison = pd.read_csv(tmp_path / 'comparison.csv', dtype={'sample': str})
    assert comparison['sample'].tolist() == ['2016', 'average']
    assert comparison['delta_avg'].tolist() == [0.0, 0.0]


def test_seeds_of_one_configuration_do_not_overwrite(tmp_path):
    write_reports([toy_year(seed=1), toy_year(seed=2)], tmp_path)
    runs = sorted(p.name for p in tmp_path.iterdir())
    assert runs == ['2016_Sto-P-W2_s1', '2016_Sto-P-W2_s2']
    assert read_run(tmp_path / runs[1]).seed == 2


def test_read_run_errors(tmp_path):
    with pt.raises(DataError, match='no run.json'):
        read_run(tmp_path)
    (tmp_path / 'run.json').write_text(json.dumps({'sample': '2016'}))
    with pt.raises(DataError, match='unreadable run record'):
        read_run(tmp_path)


def test_unwritable_output_is_a_data_error(tmp_path):
    blocker = tmp_path / 'file'
    blocker.write_text('')
    with pt.raises(DataError, match='cannot create output directory'):
        write_reports(toy_year(), blocker / 'out')
