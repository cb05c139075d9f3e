import os
import shutil

import pytest as pt

from chpplan import config
from chpplan.milp.solver import Solver
from chpplan.synthetic import spike_fixture

# tight enough for brute-force comparisons at 1e-6
TEST_GAP = 1e-9


def _backend() -> str | None:
    command = os.environ.get(config.SOLVER_CMD_ENV)
    if command:
        return command
    for name in ('cbc', 'highs'):
        found = shutil.which(name)
        if found:
            return found
    try:
        import pulp
    except ImportError:
        return None
    path = pulp.PULP_CBC_CMD().path
    return path if path and os.path.exists(path) else None


@pt.fixture(scope='session')
def solver_cmd() -> str:
    command = _backend()
    if command is None:
        pt.skip('no MPS backend (cbc, highs or pulp) available')
    return command


@pt.fixture(scope='session')
def solver(solver_cmd) -> Solver:
    return Solver(solver_cmd, gap=TEST_GAP, time_limit=300)


@pt.fixture(scope='session')
def spike():
    return spike_fixture()
