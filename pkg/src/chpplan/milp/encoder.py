import logging
import math
from pathlib import Path

from .model import Model
from .model import VarKind

logger = logging.getLogger('encoder')

OBJECTIVE_ROW = 'OBJ'

_MARKER_START = "    MARKER                 'MARKER'                 'INTORG'"
_MARKER_END = "    MARKER                 'MARKER'                 'INTEND'"


def _num(value: float) -> str:
    return format(float(value) + 0.0, '.12g')


def _entry(column: str, row: str, value: float) -> str:
    return f'    {column:<8}  {row:<8}  {_num(value):>12}'


def _bound(kind: str, column: str, value: float | None = None) -> str:
    if value is None:
        return f' {kind} BND       {column}'
    return f' {kind} BND       {column:<8}  {_num(value):>12}'


def _bounds(var) -> list[str]:
    lb, ub = var.lb, var.ub
    if lb == ub:
        return [_bound('FX', var.name, lb)]
    if var.kind is VarKind.BINARY and (lb, ub) == (0.0, 1.0):
        return [_bound('BV', var.name, 1.0)]
    lines = []
    if lb == -math.inf:
        if ub == math.inf:
            return [_bound('FR', var.name)]
        lines.append(_bound('MI', var.name))
    elif lb != 0.0 or var.kind.integral:
        # integer columns always get explicit bounds: some readers default
        # marker-bracketed columns without bounds to [0, 1]
        lines.append(_bound('LO', var.name, lb))
    if ub != math.inf:
        lines.append(_bound('UP', var.name, ub))
    elif var.kind.integral:
        lines.append(_bound('PL', var.name))
    return lines


def emit_mps(model: Model) -> str:
    """Fixed-format MPS text of `model` (minimization), in insertion order."""
    columns: list[list[tuple[str, float]]] = [[] for _ in model.variables]
    for i, c in model.objective.terms.items():
        if c != 0:
            columns[i].append((OBJECTIVE_ROW, c))
    for row in model.constraints:
        for i, c in row.expr.terms.items():
            if c != 0:
                columns[i].append((row.name, c))

    lines = [f'NAME          {model.name}', 'ROWS', f' N  {OBJECTIVE_ROW}']
    lines += [f' {row.sense.value}  {row.name}' for row in model.constraints]

    lines.append('COLUMNS')
    in_integer_run = False
    for var, entries in zip(model.variables, columns):
        if var.kind.integral != in_integer_run:
            lines.append(_MARKER_START if var.kind.integral else _MARKER_END)
            in_integer_run = var.kind.integral
        if not entries:
            entries = [(OBJECTIVE_ROW, 0.0)]
        lines += [_entry(var.name, row, c) for row, c in entries]
    if in_integer_run:
        lines.append(_MARKER_END)

    lines.append('RHS')
    if model.objective.constant != 0:
        # solvers read the objective offset as minus the OBJ right-hand side
        lines.append(_entry('RHS', OBJECTIVE_ROW, -model.objective.constant))
    lines += [
        _entry('RHS', row.name, row.rhs) for row in model.constraints if row.rhs != 0
    ]

    lines.append('BOUNDS')
    for var in model.variables:
        lines += _bounds(var)
    lines.append('ENDATA')
    return '\n'.join(lines) + '\n'


def write_mps(model: Model, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(emit_mps(model))
    logger.debug(f'wrote {model!r} to {path}')
    return path
