import dataclasses as dtc
import logging
from collections.abc import Mapping

from chpplan.errors import ModelError

from .model import Model

logger = logging.getLogger('evaluate')


@dtc.dataclass(frozen=True)
class Evaluation:
    objective: float
    max_violation: float
    worst: str = ''

    def __iter__(self):
        # unpacks as (objective, max_violation)
        return iter((self.objective, self.max_violation))


def evaluate_solution(model: Model, assignment) -> Evaluation:
    """Objective and worst bound, integrality or row violation, recomputed.

    `assignment` is an `Assignment` or a plain name -> value mapping.
    """
    values: Mapping[str, float] = (
        assignment if isinstance(assignment, Mapping) else assignment.values
    )
    by_index = {}
    for v in model.variables:
        if v.name not in values:
            raise ModelError(f'no value for variable {v.name!r}')
        by_index[v.index] = float(values[v.name])

    worst, where = 0.0, ''
    for v in model.variables:
        x = by_index[v.index]
        excess = max(v.lb - x, x - v.ub, 0.0)
        if excess > worst:
            worst, where = excess, f'bound of {v.name}'
        if v.kind.integral:
            excess = abs(x - round(x))
            if excess > worst:
                worst, where = excess, f'integrality of {v.name}'
    for row in model.constraints:
        excess = row.violation(by_index)
        if excess > worst:
            worst, where = excess, row.name

    objective = model.objective.value(by_index)
    if worst > 0:
        logger.debug(f'{model.name}: max violation {worst:.3g} at {where}')
    return Evaluation(objective, worst, where)
