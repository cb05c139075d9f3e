"""Solution files of MPS backends: CBC `solu`, HiGHS `--solution_file` and
plain `<name> <value>` pairs."""

import dataclasses as dtc
import enum
import logging
import re

from chpplan.errors import SolverError

logger = logging.getLogger('decoder')


class SolveStatus(enum.Enum):
    OPTIMAL = 'optimal'
    FEASIBLE_GAP = 'feasible-gap'
    INFEASIBLE = 'infeasible'
    ERROR = 'error'

    @property
    def has_solution(self) -> bool:
        return self in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE_GAP)


@dtc.dataclass(frozen=True)
class ParsedSolution:
    status: SolveStatus
    objective: float | None
    values: dict[str, float]
    dialect: str


_CBC_HEADER = re.compile(
    r'^(?P<status>[A-Za-z][A-Za-z ()-]*?)\s*(?:-\s*objective value\s+(?P<obj>\S+))?$'
)
_CBC_STATUS = (
    ('optimal', SolveStatus.OPTIMAL),
    ('integer infeasible', SolveStatus.INFEASIBLE),
    ('infeasible', SolveStatus.INFEASIBLE),
    ('stopped', SolveStatus.FEASIBLE_GAP),
    ('unbounded', SolveStatus.ERROR),
)

_HIGHS_STATUS = {
    'optimal': SolveStatus.OPTIMAL,
    'infeasible': SolveStatus.INFEASIBLE,
    'primal infeasible or unbounded': SolveStatus.INFEASIBLE,
    'time limit reached': SolveStatus.FEASIBLE_GAP,
    'iteration limit reached': SolveStatus.FEASIBLE_GAP,
    'solution limit reached': SolveStatus.FEASIBLE_GAP,
    'objective bound': SolveStatus.FEASIBLE_GAP,
    'objective target': SolveStatus.FEASIBLE_GAP,
}


def _float(token: str, line: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise SolverError(f'unparsable solution line: {line!r}') from None


def _parse_cbc(lines: list[str]) -> ParsedSolution:
    match = _CBC_HEADER.match(lines[0].strip())
    if match is None:
        raise SolverError(f'unparsable CBC status line: {lines[0]!r}')
    header = match['status'].lower()
    status = SolveStatus.ERROR
    for prefix, mapped in _CBC_STATUS:
        if header.startswith(prefix):
            status = mapped
            break
    if 'no integer solution' in lines[0]:
        status = SolveStatus.ERROR
    objective = _float(match['obj'], lines[0]) if match['obj'] else None

    values = {}
    for line in lines[1:]:
        # CBC flags infeasible rows/columns with a leading '**'
        fields = line.replace('**', ' ').split()
        if not fields:
            continue
        if len(fields) < 3:
            raise SolverError(f'unparsable CBC solution line: {line!r}')
        values[fields[1]] = _float(fields[2], line)
    return ParsedSolution(status, objective, values, 'cbc')


def _parse_highs(lines: list[str]) -> ParsedSolution:
    status = SolveStatus.ERROR
    objective = None
    values: dict[str, float] = {}
    it = iter(lines)
    for line in it:
        text = line.strip()
        if text == 'Model status':
            raw = next((t.strip() for t in it if t.strip()), '')
            status = _HIGHS_STATUS.get(raw.lower(), SolveStatus.ERROR)
        elif text.startswith('Objective') and objective is None:
            objective = _float(text.split()[-1], line)
        elif text.startswith('# Columns') and not values:
            count = int(_float(text.split()[-1], line))
            for _ in range(count):
                row = next(it, None)
                if row is None or len(row.split()) < 2:
                    raise SolverError('HiGHS solution ends inside the column section')
                name, value = row.split()[:2]
                values[name] = _float(value, row)
    if status.has_solution and not values:
        raise SolverError('HiGHS solution without a column section')
    return ParsedSolution(status, objective, values, 'highs')


def _parse_pairs(lines: list[str]) -> ParsedSolution:
    values = {}
    for line in lines:
        if not line.strip() or line.lstrip().startswith('#'):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise SolverError(f'unparsable solution line: {line!r}')
        values[fields[0]] = _float(fields[1], line)
    return ParsedSolution(SolveStatus.OPTIMAL, None, values, 'pairs')


def parse_solution(text: str) -> ParsedSolution:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise SolverError('empty solution file')
    first = lines[0].strip()
    if first == 'Model status':
        parsed = _parse_highs(lines)
    elif 'objective value' in first or first.lower().startswith(
        ('optimal', 'infeasible', 'integer infeasible', 'stopped', 'unbounded')
    ):
        parsed = _parse_cbc(lines)
    else:
        parsed = _parse_pairs(lines)
    logger.debug(
        f'parsed {parsed.dialect} solution: {parsed.status.value}, '
        f'{len(parsed.values)} values, objective {parsed.objective}'
    )
    return parsed
