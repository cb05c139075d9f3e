"""Subprocess boundary to any MPS-capable MILP backend.

The model is written to a temporary directory, the backend command template
is filled with {mps}, {sol}, {gap} and {timelimit}, and the solution file the
backend leaves behind is bound back to the model by variable name.
"""

import asyncio
import dataclasses as dtc
import logging
import os
import re
import shlex
import shutil
import subprocess
import tempfile
import time
from pathlib import Path

from chpplan import config
from chpplan.errors import SolverError

from .decoder import SolveStatus
from .decoder import parse_solution
from .encoder import write_mps
from .model import Model
from .model import Variable
from .model import model_stats

logger = logging.getLogger('solver')

# wall-clock slack on top of the backend's own time limit
KILL_MARGIN = 60

# CBC: "Gap:  0.0123" (fraction); HiGHS: "Gap   1.23% (tolerance: 0.01%)"
_GAP_LINE = re.compile(
    r'^\s*Gap:?\s+([-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)(%)?', re.MULTILINE
)


@dtc.dataclass(frozen=True)
class Assignment:
    values: dict[str, float]
    objective: float | None
    status: SolveStatus
    gap_tolerance: float | None = None
    achieved_gap: float | None = None
    missing: tuple[str, ...] = ()
    diagnostics: str = ''
    runtime: float = 0.0

    def __getitem__(self, key: str | Variable) -> float:
        name = key.name if isinstance(key, Variable) else key
        return self.values[name]

    def get(self, name: str, default: float = 0.0) -> float:
        return self.values.get(name, default)

    def by_index(self, model: Model) -> dict[int, float]:
        return {v.index: self.values[v.name] for v in model.variables}

    def check(self, model: Model, tol: float = config.FEAS_TOL) -> list[str]:
        """Bound and integrality violations beyond `tol`."""
        problems = []
        for v in model.variables:
            x = self.values.get(v.name)
            if x is None:
                continue
            if x < v.lb - tol or x > v.ub + tol:
                problems.append(f'{v.name}={x} outside [{v.lb}, {v.ub}]')
            if v.kind.integral and abs(x - round(x)) > tol:
                problems.append(f'{v.name}={x} is not integral')
        return problems


def achieved_gap(output: str) -> float | None:
    """Relative gap from the last summary line of a backend log, if it has one."""
    found = _GAP_LINE.findall(output)
    if not found:
        return None
    value, percent = found[-1]
    return float(value) / 100 if percent else float(value)


def _template_for(executable: str) -> str:
    name = Path(executable).name.lower()
    key = 'highs' if 'highs' in name else 'cbc'
    template = config.SOLVER_TEMPLATES[key]
    return template.replace(key, shlex.quote(executable), 1)


def resolve_command(command: str | None = None) -> str:
    """Backend command template: explicit, PLANNER_SOLVER_CMD, then cbc/highs on PATH.

    A value without placeholders names an executable; the CBC or HiGHS
    template is chosen from its file name.
    """
    command = command or os.environ.get(config.SOLVER_CMD_ENV) or config.SOLVER_CMD
    if command:
        if command in config.SOLVER_TEMPLATES:
            return config.SOLVER_TEMPLATES[command]
        if '{mps}' in command:
            return command
        return _template_for(command)
    for key in ('cbc', 'highs'):
        found = shutil.which(key)
        if found:
            return _template_for(found)
    raise SolverError(
        f'no MPS backend found: install cbc or highs, or set {config.SOLVER_CMD_ENV}'
    )


def _argv(template: str, mps: Path, sol: Path, gap: float, time_limit: float):
    try:
        line = template.format(
            mps=shlex.quote(str(mps)),
            sol=shlex.quote(str(sol)),
            gap=gap,
            timelimit=time_limit,
        )
    except (KeyError, IndexError) as e:
        raise SolverError(f'bad solver command template {template!r}: {e}') from None
    return shlex.split(line)


def _dump(mps: Path, dump_dir: str | Path | None, model: Model) -> str | None:
    if dump_dir is None:
        return None
    target = Path(dump_dir)
    target.mkdir(parents=True, exist_ok=True)
    dest = target / f'{model.name}.mps'
    shutil.copyfile(mps, dest)
    return str(dest)


def _collect(
    model: Model,
    returncode: int,
    output: str,
    sol: Path,
    mps: Path,
    gap: float,
    runtime: float,
    dump_dir,
) -> Assignment:
    if returncode != 0:
        dumped = _dump(mps, dump_dir, model)
        logger.error(f'{model.name}: backend exited with {returncode}')
        return Assignment(
            {},
            None,
            SolveStatus.ERROR,
            diagnostics=output[-4000:]
            + (f'\nmodel dumped to {dumped}' if dumped else ''),
            runtime=runtime,
        )
    if not sol.exists() or sol.stat().st_size == 0:
        raise SolverError(
            f'{model.name}: backend wrote no solution file', _dump(mps, dump_dir, model)
        )
    try:
        parsed = parse_solution(sol.read_text())
    except SolverError as e:
        raise SolverError(f'{model.name}: {e}', _dump(mps, dump_dir, model)) from None

    values, missing = {}, []
    for v in model.variables:
        if v.name in parsed.values:
            values[v.name] = parsed.values[v.name]
        else:
            values[v.name] = 0.0
            missing.append(v.name)
    if missing and parsed.status.has_solution:
        # CBC leaves out columns at zero
        log = logger.debug if parsed.dialect == 'cbc' else logger.warning
        log(
            f'{model.name}: {len(missing)} variables missing from the solution, '
            f'set to 0 (first: {missing[0]})'
        )
    objective = parsed.objective
    if parsed.status.has_solution:
        recomputed = model.objective.value(
            {v.index: values[v.name] for v in model.variables}
        )
        offset = model.objective.constant
        if objective is None:
            objective = recomputed
        elif offset and abs(objective + offset - recomputed) < abs(
            objective - recomputed
        ):
            # reported without the constant carried on the OBJ right-hand side
            objective += offset
    if not parsed.status.has_solution:
        _dump(mps, dump_dir, model)
    if parsed.status is SolveStatus.FEASIBLE_GAP:
        logger.warning(f'{model.name}: stopped on a limit before proving optimality')
    return Assignment(
        values,
        objective,
        parsed.status,
        gap_tolerance=gap,
        achieved_gap=achieved_gap(output) if parsed.status.has_solution else None,
        missing=tuple(missing),
        diagnostics=output[-4000:],
        runtime=runtime,
    )


def _log_result(model: Model, result: Assignment):
    stats = model_stats(model)
    logger.info(
        f'{model.name}: {result.status.value}, objective {result.objective}, '
        f'{result.runtime:.2f}s ({stats.continuous} cont, {stats.integral} int, '
        f'{stats.constraints} rows)'
    )


def solve_external(
    model: Model,
    command: str | None = None,
    gap: float = config.SOLVER_GAP,
    time_limit: float = config.SOLVER_TIME_LIMIT,
    dump_dir: str | Path | None = None,
) -> Assignment:
    template = resolve_command(command)
    with tempfile.TemporaryDirectory(prefix='chpplan-') as tmp:
        mps, sol = Path(tmp) / 'model.mps', Path(tmp) / 'model.sol'
        write_mps(model, mps)
        argv = _argv(template, mps, sol, gap, time_limit)
        logger.debug(f'running {argv}')
        start = time.perf_counter()
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=time_limit + KILL_MARGIN,
                cwd=tmp,
            )
        except FileNotFoundError:
            raise SolverError(f'backend executable not found: {argv[0]}') from None
        except subprocess.TimeoutExpired:
            raise SolverError(
                f'{model.name}: backend ignored its time limit',
                _dump(mps, dump_dir, model),
            ) from None
        runtime = time.perf_counter() - start
        result = _collect(
            model,
            proc.returncode,
            proc.stdout + proc.stderr,
            sol,
            mps,
            gap,
            runtime,
            dump_dir,
        )
    _log_result(model, result)
    return result


async def solve_external_async(
    model: Model,
    command: str | None = None,
    gap: float = config.SOLVER_GAP,
    time_limit: float = config.SOLVER_TIME_LIMIT,
    dump_dir: str | Path | None = None,
) -> Assignment:
    """`solve_external` on an asyncio subprocess; distinct models may overlap."""
    template = resolve_command(command)
    with tempfile.TemporaryDirectory(prefix='chpplan-') as tmp:
        mps, sol = Path(tmp) / 'model.mps', Path(tmp) / 'model.sol'
        write_mps(model, mps)
        argv = _argv(template, mps, sol, gap, time_limit)
        start = time.perf_counter()
        try:
            proc = await asyncio.create_subprocess_exec(
                *argv,
                stdout=asyncio.subprocess.PIPE,
                stderr=asyncio.subprocess.STDOUT,
                cwd=tmp,
            )
        except FileNotFoundError:
            raise SolverError(f'backend executable not found: {argv[0]}') from None
        try:
            out, _ = await asyncio.wait_for(
                proc.communicate(), timeout=time_limit + KILL_MARGIN
            )
        except asyncio.TimeoutError:
            proc.kill()
            await proc.wait()
            raise SolverError(
                f'{model.name}: backend ignored its time limit',
                _dump(mps, dump_dir, model),
            ) from None
        runtime = time.perf_counter() - start
        result = _collect(
            model,
            proc.returncode,
            out.decode(errors='replace'),
            sol,
            mps,
            gap,
            runtime,
            dump_dir,
        )
    _log_result(model, result)
    return result


class Solver:
    """Backend settings shared by every solve of one run."""

    def __init__(
        self,
        command: str | None = None,
        gap: float = config.SOLVER_GAP,
        time_limit: float = config.SOLVER_TIME_LIMIT,
        dump_dir: str | Path | None = None,
    ):
        self.command = resolve_command(command)
        self.gap = gap
        self.time_limit = time_limit
        self.dump_dir = dump_dir

    def __repr__(self):
        return f'Solver({self.command!r}, gap={self.gap}, time_limit={self.time_limit})'

    def solve(self, model: Model) -> Assignment:
        return solve_external(
            model, self.command, self.gap, self.time_limit, self.dump_dir
        )

    async def solve_async(self, model: Model) -> Assignment:
        return await solve_external_async(
            model, self.command, self.gap, self.time_limit, self.dump_dir
        )

    def solve_optimal(self, model: Model, what: str) -> Assignment:
        """Solve and insist on a usable solution."""
        result = self.solve(model)
        if not result.status.has_solution:
            raise SolverError(
                f'{what}: backend returned {result.status.value}',
                _dumped_name(self.dump_dir, model),
            )
        return result


def _dumped_name(dump_dir, model: Model) -> str | None:
    return None if dump_dir is None else str(Path(dump_dir) / f'{model.name}.mps')
