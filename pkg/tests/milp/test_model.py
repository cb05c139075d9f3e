import math

import pytest as pt

from chpplan.errors import ModelError
from chpplan.milp.decoder import SolveStatus
from chpplan.milp.evaluate import evaluate_solution
from chpplan.milp.model import LinExpr
from chpplan.milp.model import Model
from chpplan.milp.model import RowDecl
from chpplan.milp.model import Sense
from chpplan.milp.model import VarDecl
from chpplan.milp.model import VarKind
from chpplan.milp.model import build_model
from chpplan.milp.model import model_stats
from chpplan.milp.solver import Assignment


def small_model() -> Model:
    m = Model('SMALL')
    x = m.add_var('x', ub=4)
    n = m.add_var('n', VarKind.INTEGER, ub=10)
    b = m.add_var('b', VarKind.BINARY)
    m.add_constraint(x + 2 * n <= 7, 'c1')
    m.add_constraint(x - b >= 1, 'c2')
    m.set_objective(-x - 3 * n + b + 5)
    return m


def test_operators_build_rows():
    m = small_model()
    c1, c2 = m.constraints
    assert c1.sense is Sense.LE and c1.rhs == 7.0
    assert c1.expr.terms == {0: 1.0, 1: 2.0}
    assert c2.sense is Sense.GE and c2.rhs == 1.0
    assert c2.expr.terms == {0: 1.0, 2: -1.0}
    assert m.objective.constant == 5.0


def test_constants_move_to_the_right():
    m = Model()
    x = m.add_var('x')
    row = m.add_constraint(2 * x + 3 == 4 - x, 'r')
    assert row.sense is Sense.EQ
    assert row.expr.terms == {0: 3.0}
    assert row.rhs == 1.0


def test_total_collects_repeated_terms():
    m = Model()
    x, y = m.add_var('x'), m.add_var('y')
    expr = LinExpr.total([x, y, x, 2.5])
    assert expr.terms == {0: 2.0, 1: 1.0}
    assert expr.constant == 2.5
    with pt.raises(ModelError, match='not linear'):
        (x + 1) * y


def test_names_and_bounds_are_checked():
    m = Model()
    m.add_var('x')
    with pt.raises(ModelError, match='duplicate variable'):
        m.add_var('x')
    with pt.raises(ModelError, match='MPS-safe'):
        m.add_var('has space')
    with pt.raises(ModelError, match='MPS-safe'):
        m.add_var('cost$')
    with pt.raises(ModelError, match='inconsistent bounds'):
        m.add_var('y', lb=2, ub=1)
    b = m.add_var('b', VarKind.BINARY, lb=-5, ub=7)
    assert (b.lb, b.ub) == (0.0, 1.0)
    m.add_constraint(m.var('x') <= 1, 'r')
    with pt.raises(ModelError, match='duplicate constraint'):
        m.add_constraint(m.var('x') >= 0, 'r')
    with pt.raises(ModelError, match='unknown variable'):
        m.var('z')


def test_foreign_variables_are_rejected():
    a, b = Model('A'), Model('B')
    a.add_var('x')
    y = a.add_var('y')
    b.add_var('only')
    with pt.raises(ModelError, match='undeclared'):
        b.add_constraint(y <= 1, 'r')
    with pt.raises(ModelError, match='undeclared'):
        b.set_objective(y)


def test_fix_replaces_bounds():
    m = small_model()
    fixed = m.fix(m.var('n'), 3)
    assert (fixed.lb, fixed.ub) == (3.0, 3.0)
    assert m.var('n') is fixed
    assert m.variables[1] is fixed


def test_build_model_from_declarations():
    m = build_model(
        [VarDecl('x', ub=4), VarDecl('n', VarKind.INTEGER, ub=10)],
        [RowDecl('cap', {'x': 1, 'n': 2}, Sense.LE, 7)],
        objective={'x': -1, 'n': -3},
        objective_constant=1.5,
        name='decl',
    )
    assert m.name == 'decl'
    assert m.constraints[0].expr.terms == {0: 1.0, 1: 2.0}
    assert m.objective.constant == 1.5
    with pt.raises(ModelError, match='unknown variable'):
        build_model([VarDecl('x')], [RowDecl('r', {'y': 1}, Sense.LE, 0)])


def test_model_stats():
    stats = model_stats(small_model())
    assert (stats.continuous, stats.integer, stats.binary) == (1, 1, 1)
    assert stats.integral == 2
    assert stats.constraints == 2
    assert stats.nonzeros == 4


def test_evaluate_solution_reports_the_worst_violation():
    m = small_model()
    objective, violation = evaluate_solution(m, {'x': 3, 'n': 3, 'b': 0})
    assert objective == pt.approx(-3 - 9 + 5)
    assert violation == pt.approx(2.0)
    e = evaluate_solution(m, {'x': 3, 'n': 3, 'b': 0})
    assert e.worst == 'c1'
    e = evaluate_solution(m, {'x': 5, 'n': 0, 'b': 1})
    assert e.max_violation == pt.approx(1.0)
    assert e.worst == 'bound of x'
    ok = evaluate_solution(m, {'x': 1, 'n': 3, 'b': 0})
    assert ok.max_violation == 0.0
    with pt.raises(ModelError, match='no value'):
        evaluate_solution(m, {'x': 1})


def test_evaluate_solution_flags_fractional_integers():
    m = small_model()
    e = evaluate_solution(m, {'x': 2, 'n': 2, 'b': 0.4})
    assert e.max_violation == pt.approx(0.4)
    assert e.worst == 'integrality of b'
    e = evaluate_solution(m, {'x': 2, 'n': 2.25, 'b': 0})
    assert e.worst == 'integrality of n'


def test_evaluate_solution_accepts_an_assignment():
    m = small_model()
    result = Assignment({'x': 1.0, 'n': 3.0, 'b': 0.0}, -8.0, SolveStatus.OPTIMAL)
    objective, violation = evaluate_solution(m, result)
    assert objective == pt.approx(1 - 9 + 5)
    assert violation == 0.0


def test_infinite_bounds_survive():
    m = Model()
    free = m.add_var('f', lb=-math.inf)
    assert free.lb == -math.inf and free.ub == math.inf
