import json

import pandas as pd
import pytest as pt

from chpplan.cli import EXIT_DATA
from chpplan.cli import EXIT_OK
from chpplan.cli import EXIT_USAGE
from chpplan.cli import main
from chpplan.reports import RunRecord
from chpplan.synthetic import write_fixture


@pt.fixture
def fixture_files(tmp_path):
    return write_fixture(tmp_path / 'input')


def year_args(files, out, *extra):
    return [
        'simulate-year',
        '--config',
        str(files['config']),
        '--hours-per-week',
        '24',
        '--method',
        'P',
        '--horizon-weeks',
        '1',
        '--sample',
        str(files['sample']),
        '--archive',
        str(files['archive']),
        '--seed',
        '1',
        '--out',
        str(out),
        *extra,
    ]


def test_validate_bundled_and_written_configs(fixture_files):
    assert main(['validate']) == EXIT_OK
    assert main(['validate', '--municipality', 'B']) == EXIT_OK
    assert main(['validate', '--config', str(fixture_files['config'])]) == EXIT_OK


def test_usage_errors(tmp_path):
    assert main([]) == EXIT_USAGE
    assert main(['validate', '--bogus']) == EXIT_USAGE
    assert main(['validate', '--config', 'a.json', '--municipality', 'A']) == EXIT_USAGE
    assert main(['gen-scenarios', '--week', '1']) == EXIT_USAGE
    assert main(['compare', '--out', str(tmp_path)]) == EXIT_USAGE


def test_out_of_range_horizon_is_a_usage_error(fixture_files, tmp_path):
    args = year_args(fixture_files, tmp_path / 'out')
    args[args.index('--horizon-weeks') + 1] = '9'
    assert main(args) == EXIT_USAGE


def test_manifest_fills_and_checks_flags(fixture_files, tmp_path, caplog):
    manifest = tmp_path / 'run.json'
    manifest.write_text(json.dumps({'method': 'Q'}))
    args = year_args(fixture_files, tmp_path / 'out')
    i = args.index('--method')
    del args[i : i + 2]
    assert main(args + ['--manifest', str(manifest)]) == EXIT_USAGE
    assert 'method must be one of' in caplog.text

    manifest.write_text(json.dumps({'sample': str(tmp_path / 'nowhere')}))
    i = args.index('--sample')
    del args[i : i + 2]
    assert main(args + ['--manifest', str(manifest), '--method', 'P']) == EXIT_DATA
    assert 'sample directory not found' in caplog.text

    assert main(['validate', '--manifest', str(tmp_path / 'missing.json')]) == EXIT_DATA


def test_missing_sample_names_the_path(fixture_files, tmp_path, caplog):
    args = year_args(fixture_files, tmp_path / 'out')
    missing = tmp_path / 'samples' / '2099'
    args[args.index('--sample') + 1] = str(missing)
    assert main(args) == EXIT_DATA
    assert str(missing) in caplog.text


def test_missing_config_is_a_data_error(tmp_path):
    assert main(['validate', '--config', str(tmp_path / 'nope.json')]) == EXIT_DATA


def test_gen_scenarios(fixture_files, tmp_path):
    out = tmp_path / 'scenarios' / 'p.csv'
    common = [
        'gen-scenarios',
        '--hours-per-week',
        '24',
        '--week',
        '3',
        '--horizon',
        '2',
        '--archive',
        str(fixture_files['archive']),
        '--seed',
        '1',
        '--out',
        str(out),
    ]
    assert main(common + ['--method', 'P']) == EXIT_OK
    assert out.exists()
    # forecasting methods need the observed part of the sample
    assert main(common + ['--method', 'F2']) == EXIT_USAGE


def test_compare_recorded_runs(tmp_path):
    runs = []
    for name, ev, total in (('sto', False, 83.0), ('exp', True, 84.0)):
        run = tmp_path / name
        run.mkdir()
        record = RunRecord(
            sample='2016', method='P', horizon=1, seed=1, expected_value=ev, total=total
        )
        (run / 'run.json').write_text(record.model_dump_json())
        runs.append(str(run))
    out = tmp_path / 'table'
    assert main(['compare', '--runs', *runs, '--out', str(out)]) == EXIT_OK
    table = pd.read_csv(out / 'comparison.csv', dtype={'sample': str})
    assert round(table.loc[0, 'delta_avg'], 2) == 1.19

    missing = str(tmp_path / 'none')
    assert main(['compare', '--runs', missing, '--out', str(out)]) == EXIT_DATA


@pt.mark.slow
@pt.mark.solver
def test_simulate_year_is_reproducible(fixture_files, tmp_path, solver_cmd):
    outputs = []
    for name in ('first', 'second'):
        out = tmp_path / name
        plan = str(fixture_files['plan'])
        extra = ['--plan', plan, '--weeks', '3', '--solver', solver_cmd]
        assert main(year_args(fixture_files, out, *extra)) == EXIT_OK
        outputs.append(out)
    first, second = outputs
    year = pd.read_csv(first / 'year_result.csv')
    assert year['week'].tolist() == [1, 2, 3]
    names = ('year_result.csv', 'options_usage.csv', 'weekly/week_03.csv', 'run.json')
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()
    assert json.loads((first / 'run.json').read_text())['sample'] == '2016'


@pt.mark.solver
def test_plan_contracts(fixture_files, tmp_path, solver_cmd):
    out = tmp_path / 'plan'
    args = [
        'plan-contracts',
        '--config',
        str(fixture_files['config']),
        '--hours-per-week',
        '24',
        '--archive',
        str(fixture_files['archive']),
        '--weeks',
        '12',
        '--solver',
        solver_cmd,
        '--out',
        str(out),
    ]
    assert main(args) == EXIT_OK
    plan = pd.read_csv(out / 'plan.csv', dtype={'contract': str})
    assert plan['week'].max() == 12
    assert set(plan['contract']) == {'S'}
