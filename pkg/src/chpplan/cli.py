"""Command-line front end.

    chpplan validate [--config PATH ...]
    chpplan gen-scenarios --method M --week N --horizon W --archive DIR
                          --seed S --out CSV
    chpplan plan-contracts --archive DIR --out DIR [--expected-value]
    chpplan simulate-year --method M --horizon-weeks W --sample DIR --archive DIR
                          --seed S --out DIR [--plan CSV] [--expected-value]
    chpplan compare --runs DIR [DIR ...] --out DIR
    chpplan compare --samples DIR [DIR ...] --archive DIR --method M
                    --horizon-weeks W --seed S --out DIR

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver or model error.
"""

import argparse
import asyncio
import json
import logging
import os
import sys
from pathlib import Path

import pydantic
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import field_validator
from rich.console import Console
from rich.table import Table

from chpplan import config
from chpplan.domain.loader import bundled_config
from chpplan.domain.loader import load_and_validate
from chpplan.domain.loader import load_archive
from chpplan.domain.loader import load_sample
from chpplan.errors import DataError
from chpplan.errors import ModelError
from chpplan.errors import SolverError
from chpplan.errors import UsageError
from chpplan.log import setup_logging
from chpplan.milp.solver import Solver
from chpplan.orchestrator import RunJob
from chpplan.orchestrator import compare_runs
from chpplan.orchestrator import recent_history
from chpplan.orchestrator import run_many
from chpplan.orchestrator import run_receding_year
from chpplan.orchestrator import solve_contract_phase
from chpplan.phase1 import ContractPlan
from chpplan.reports import read_run
from chpplan.reports import write_reports
from chpplan.scengen.methods import build_scenario_set
from chpplan.scengen.methods import export_scenarios

logger = logging.getLogger('cli')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3


class RunManifest(BaseModel):
    """Inputs of one invocation; a `--manifest` file fills flags left unset."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    subcommand: str | None = None
    config: str | None = None
    municipality: str | None = None
    archive: str | None = None
    sample: str | None = None
    plan: str | None = None
    method: str | None = None
    horizon: int | None = None
    seed: int | None = None
    solver: str | None = None
    out: str | None = None

    @field_validator('method')
    @classmethod
    def _method(cls, value):
        if value is not None and value not in config.SCENARIO_METHODS:
            known = ', '.join(config.SCENARIO_METHODS)
            raise ValueError(f'method must be one of {known}')
        return value

    @field_validator('horizon')
    @classmethod
    def _horizon(cls, value):
        if value is not None and not 1 <= value <= config.MAX_HORIZON_WEEKS:
            raise ValueError(f'W must be in [1, {config.MAX_HORIZON_WEEKS}]')
        return value

    @field_validator('out')
    @classmethod
    def _writable(cls, value):
        if value is None:
            return value
        target = Path(value).resolve()
        # nearest existing ancestor decides
        while not target.exists() and target != target.parent:
            target = target.parent
        if not target.is_dir() or not os.access(target, os.W_OK):
            raise ValueError(f'output directory {value} is not writable')
        return value


class ArgumentParser(argparse.ArgumentParser):
    """Raises instead of exiting so that usage errors map to their exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common() -> argparse.ArgumentParser:
    common = ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument('--config', type=str, help='municipality JSON document')
    source.add_argument(
        '--municipality', type=str, help='bundled municipality (A or B)'
    )
    common.add_argument(
        '--solver', type=str, help='solver executable or command template'
    )
    common.add_argument('--hours-per-week', type=int, default=config.HOURS_PER_WEEK)
    common.add_argument('--manifest', type=str, help='JSON run manifest')
    common.add_argument('--log-level', type=str, default=config.LOGGING_LEVEL)
    return common


def build_parser() -> ArgumentParser:
    common = _common()
    parser = ArgumentParser(prog='chpplan', description=__doc__.split('\n')[0])
    sub = parser.add_subparsers(dest='subcommand', required=True)

    validate = sub.add_parser('validate', parents=[common], help='check configurations')
    validate.set_defaults(handler=cmd_validate)

    gen = sub.add_parser('gen-scenarios', parents=[common], help='scenario set as CSV')
    gen.add_argument('--method', type=str)
    gen.add_argument('--week', type=int, required=True, help='first week, 1-based')
    gen.add_argument('--horizon', type=int)
    gen.add_argument('--archive', type=str)
    gen.add_argument(
        '--sample', type=str, help='observations before --week (F methods)'
    )
    gen.add_argument('--seed', type=int)
    gen.add_argument('--n-paths', type=int, default=config.N_PATHS)
    gen.add_argument('--out', type=str)
    gen.set_defaults(
        handler=cmd_gen_scenarios,
        needs=('method', 'horizon', 'seed', 'archive', 'out'),
    )

    plan = sub.add_parser('plan-contracts', parents=[common], help='solve phase 1')
    plan.add_argument('--archive', type=str)
    plan.add_argument('--out', type=str)
    plan.add_argument('--weeks', type=int)
    plan.add_argument('--expected-value', action='store_true')
    plan.set_defaults(handler=cmd_plan_contracts, needs=('archive', 'out'))

    year = sub.add_parser(
        'simulate-year', parents=[common], help='receding-horizon year'
    )
    year.add_argument('--method', type=str)
    year.add_argument('--horizon-weeks', dest='horizon', type=int)
    year.add_argument('--sample', type=str)
    year.add_argument('--archive', type=str)
    year.add_argument('--plan', type=str, help='contract plan CSV; solved when absent')
    year.add_argument('--seed', type=int)
    year.add_argument('--weeks', type=int)
    year.add_argument('--n-paths', type=int, default=config.N_PATHS)
    year.add_argument('--expected-value', action='store_true')
    year.add_argument('--out', type=str)
    year.set_defaults(
        handler=cmd_simulate_year,
        needs=('method', 'horizon', 'sample', 'archive', 'seed', 'out'),
    )

    compare = sub.add_parser('compare', parents=[common], help='Sto against Exp totals')
    compare.add_argument('--runs', type=str, nargs='+')
    compare.add_argument('--samples', type=str, nargs='+')
    compare.add_argument('--archive', type=str)
    compare.add_argument('--method', type=str)
    compare.add_argument('--horizon-weeks', dest='horizon', type=int)
    compare.add_argument('--seed', type=int)
    compare.add_argument('--weeks', type=int)
    compare.add_argument('--n-paths', type=int, default=config.N_PATHS)
    compare.add_argument('--concurrency', type=int, default=4)
    compare.add_argument('--out', type=str)
    compare.set_defaults(handler=cmd_compare, needs=('out',))
    return parser


def _apply_manifest(args: argparse.Namespace) -> RunManifest:
    fields = RunManifest.model_fields
    values = {}
    if args.manifest:
        try:
            values = json.loads(Path(args.manifest).read_text())
        except FileNotFoundError:
            raise DataError('manifest not found', args.manifest) from None
        except json.JSONDecodeError as e:
            raise DataError(f'not valid JSON: {e}', args.manifest) from None
        if not isinstance(values, dict):
            raise DataError('manifest must be a JSON object', args.manifest)
    for name in fields:
        given = getattr(args, name, None)
        if given is not None:
            values[name] = given
        elif name in values and name != 'subcommand':
            setattr(args, name, values[name])
    values['subcommand'] = args.subcommand
    try:
        manifest = RunManifest.model_validate(values)
    except pydantic.ValidationError as e:
        details = '; '.join(
            f'{".".join(str(p) for p in err["loc"])}: {err["msg"]}'
            for err in e.errors()
        )
        raise UsageError(details) from None
    needs = getattr(args, 'needs', ())
    missing = [name for name in needs if getattr(args, name, None) is None]
    if missing:
        flags = ', '.join('--' + name.replace('_', '-') for name in missing)
        raise UsageError(f'{args.subcommand} requires {flags}')
    return manifest


def _plant(args):
    if args.config:
        return load_and_validate(args.config)
    return bundled_config(args.municipality or 'A')


def _solver(args) -> Solver:
    return Solver(args.solver)


def _n_hours(args) -> int:
    return args.hours_per_week * config.WEEKS_PER_YEAR


def cmd_validate(args) -> int:
    documents = [args.config] if args.config else None
    names = [args.municipality] if args.municipality else ['A', 'B']
    loaded = []
    if documents:
        loaded.append(load_and_validate(documents[0]))
    else:
        loaded += [bundled_config(name) for name in names]
    for plant, contracts in loaded:
        options = sum(1 for c in contracts if not c.fixed)
        logger.info(
            f'{plant.name}: ok, {len(contracts)} contracts ({options} with options)'
        )
    return EXIT_OK


def cmd_gen_scenarios(args) -> int:
    H = args.hours_per_week
    archive = load_archive(args.archive, _n_hours(args))
    week = args.week - 1
    recent = None
    if args.method != 'P':
        if args.sample is None:
            raise UsageError(
                f'method {args.method} needs --sample for recent observations'
            )
        sample = load_sample(args.sample, n_hours=_n_hours(args))
        recent = recent_history(archive, sample, week, H)
    scenarios = build_scenario_set(
        args.method,
        archive,
        recent,
        week,
        args.horizon,
        args.seed,
        n_paths=args.n_paths,
        hours_per_week=H,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    export_scenarios(scenarios, out)
    logger.info(f'{len(scenarios)} {args.method} scenarios written to {out}')
    return EXIT_OK


def cmd_plan_contracts(args) -> int:
    plant, contracts = _plant(args)
    archive = load_archive(args.archive, _n_hours(args))
    phase = solve_contract_phase(
        plant,
        contracts,
        archive,
        _solver(args),
        n_weeks=args.weeks,
        hours_per_week=args.hours_per_week,
        expected_value=args.expected_value,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    phase.plan.write_csv(out / 'plan.csv')
    logger.info(
        f'contract plan written to {out / "plan.csv"}, '
        f'objective {phase.objective:.2f}'
    )
    return EXIT_OK


def _contract_plan(args, plant, contracts, archive, solver, expected_value):
    if getattr(args, 'plan', None):
        plan = ContractPlan.read_csv(args.plan)
        plan.validate(contracts, args.hours_per_week)
        return plan
    return solve_contract_phase(
        plant,
        contracts,
        archive,
        solver,
        hours_per_week=args.hours_per_week,
        expected_value=expected_value,
    ).plan


def cmd_simulate_year(args) -> int:
    plant, contracts = _plant(args)
    sample = load_sample(args.sample, n_hours=_n_hours(args))
    archive = load_archive(args.archive, _n_hours(args))
    solver = _solver(args)
    plan = _contract_plan(args, plant, contracts, archive, solver, args.expected_value)
    result = run_receding_year(
        plant,
        contracts,
        plan,
        sample,
        args.method,
        args.horizon,
        args.seed,
        archive,
        solver,
        n_weeks=args.weeks,
        hours_per_week=args.hours_per_week,
        n_paths=args.n_paths,
        expected_value=args.expected_value,
    )
    write_reports(result, args.out)
    return EXIT_OK


def _print_table(frame):
    table = Table(title='Sto vs Exp total cost')
    for column in frame.columns:
        table.add_column(column, justify='left' if column == 'sample' else 'right')
    for row in frame.itertuples(index=False):
        table.add_row(
            *(v if isinstance(v, str) else f'{v:,.2f}' for v in row)
        )
    Console(stderr=True).print(table)


def cmd_compare(args) -> int:
    if bool(args.runs) == bool(args.samples):
        raise UsageError('compare takes either --runs or --samples')
    if args.runs:
        results = [read_run(run) for run in args.runs]
    else:
        needs = ('archive', 'method', 'horizon', 'seed')
        missing = [f for f in needs if getattr(args, f) is None]
        if missing:
            flags = ', '.join('--' + f.replace('_', '-') for f in missing)
            raise UsageError(f'compare --samples requires {flags}')
        plant, contracts = _plant(args)
        archive = load_archive(args.archive, _n_hours(args))
        samples = [load_sample(s, n_hours=_n_hours(args)) for s in args.samples]
        solver = _solver(args)
        plans = {
            ev: _contract_plan(args, plant, contracts, archive, solver, ev)
            for ev in (False, True)
        }
        jobs = [
            RunJob(sample, args.method, args.horizon, args.seed, ev)
            for sample in samples
            for ev in (False, True)
        ]
        results = asyncio.run(
            run_many(
                plant,
                contracts,
                plans,
                archive,
                jobs,
                solver,
                concurrency=args.concurrency,
                n_weeks=args.weeks,
                hours_per_week=args.hours_per_week,
                n_paths=args.n_paths,
            )
        )
        write_reports(results, Path(args.out) / 'runs')
    table = compare_runs(results)
    write_reports(table, args.out)
    _print_table(table)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_manifest(args)
        setup_logging(args.log_level.upper())
        return args.handler(args)
    except UsageError as e:
        logger.error(f'usage: {e}')
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as e:
        logger.error(f'data error: {e}')
        return EXIT_DATA
    except (SolverError, ModelError) as e:
        logger.error(f'{type(e).__name__}: {e}')
        return EXIT_SOLVER


if __name__ == '__main__':
    sys.exit(main())
