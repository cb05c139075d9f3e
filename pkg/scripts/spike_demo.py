import argparse
import asyncio

from chpplan.milp.solver import Solver
from chpplan.orchestrator import RunJob
from chpplan.orchestrator import run_many
from chpplan.reports import write_reports
from chpplan.synthetic import spike_fixture


async def demo(args):
    fx = spike_fixture()
    solver = Solver(args.solver)
    jobs = [RunJob(fx.sample, 'P', horizon, args.seed) for horizon in args.horizons]
    results = await run_many(
        fx.plant,
        fx.contracts,
        {False: fx.plan},
        fx.archive,
        jobs,
        solver,
        n_weeks=fx.n_weeks,
        hours_per_week=fx.hours_per_week,
    )
    for r in results:
        print(
            f'{r.configuration}: total {r.total:,.2f}, '
            f'missed heat {r.missed_heat:.2f} MWh'
        )
    if args.out:
        write_reports(results, args.out)


if __name__ == '__main__':
    parser = argparse.ArgumentParser()
    parser.add_argument('--solver', type=str, default=None)
    parser.add_argument('--seed', type=int, default=1)
    parser.add_argument('--horizons', type=int, nargs='+', default=[1, 2])
    parser.add_argument('--out', type=str, default=None)
    args = parser.parse_args()
    try:
        asyncio.run(demo(args))
    except KeyboardInterrupt:
        print('Bye!')
