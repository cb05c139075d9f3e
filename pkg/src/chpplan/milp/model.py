"""Minimal algebraic layer for mixed-integer linear programs.

A `Model` is filled once by a builder and then only read: by the MPS
encoder, by the solver boundary and by `evaluate_solution`.
"""

import dataclasses as dtc
import enum
import logging
import math
import re
from collections.abc import Iterable
from collections.abc import Mapping

from chpplan.errors import ModelError

logger = logging.getLogger('model')

MAX_NAME_LENGTH = 255

_UNSAFE_NAME = re.compile(r'\s|\$')


class VarKind(enum.Enum):
    CONTINUOUS = 'continuous'
    INTEGER = 'integer'
    BINARY = 'binary'

    @property
    def integral(self) -> bool:
        return self is not VarKind.CONTINUOUS


class Sense(enum.Enum):
    LE = 'L'
    EQ = 'E'
    GE = 'G'


@dtc.dataclass(frozen=True)
class Variable:
    name: str
    index: int
    kind: VarKind = VarKind.CONTINUOUS
    lb: float = 0.0
    ub: float = math.inf

    def __hash__(self):
        return self.index

    def _expr(self) -> 'LinExpr':
        return LinExpr({self.index: 1.0})

    def __add__(self, other):
        return self._expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._expr() - other

    def __rsub__(self, other):
        return -self._expr() + other

    def __mul__(self, coef: float):
        return self._expr() * coef

    __rmul__ = __mul__

    def __neg__(self):
        return self._expr() * -1.0

    def __le__(self, other):
        return self._expr() <= other

    def __ge__(self, other):
        return self._expr() >= other

    def __eq__(self, other):  # type: ignore[override]
        if isinstance(other, Variable):
            return self.index == other.index and self.name == other.name
        return self._expr() == other


Operand = 'LinExpr | Variable | float | int'


class LinExpr:
    """Sparse linear expression: variable index -> coefficient, plus a constant."""

    __slots__ = ('terms', 'constant')

    def __init__(self, terms: Mapping[int, float] | None = None, constant: float = 0.0):
        self.terms: dict[int, float] = dict(terms or {})
        self.constant = float(constant)

    @staticmethod
    def lift(value) -> 'LinExpr':
        if isinstance(value, LinExpr):
            return value
        if isinstance(value, Variable):
            return value._expr()
        return LinExpr(constant=float(value))

    @classmethod
    def total(cls, items: Iterable) -> 'LinExpr':
        """Sum of variables, expressions and numbers without intermediate copies."""
        out = cls()
        for item in items:
            out.add(item)
        return out

    def add(self, item, coef: float = 1.0) -> 'LinExpr':
        """In-place `self += coef * item`."""
        if isinstance(item, Variable):
            self.terms[item.index] = self.terms.get(item.index, 0.0) + coef
        elif isinstance(item, LinExpr):
            for i, c in item.terms.items():
                self.terms[i] = self.terms.get(i, 0.0) + coef * c
            self.constant += coef * item.constant
        else:
            self.constant += coef * float(item)
        return self

    def copy(self) -> 'LinExpr':
        return LinExpr(self.terms, self.constant)

    def __add__(self, other):
        return self.copy().add(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy().add(other, -1.0)

    def __rsub__(self, other):
        return (self * -1.0).add(other)

    def __mul__(self, coef: float):
        if isinstance(coef, (LinExpr, Variable)):
            raise ModelError('product of two expressions is not linear')
        coef = float(coef)
        terms = {i: c * coef for i, c in self.terms.items()}
        return LinExpr(terms, self.constant * coef)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __le__(self, other):
        return Constraint.relate(self, Sense.LE, other)

    def __ge__(self, other):
        return Constraint.relate(self, Sense.GE, other)

    def __eq__(self, other):  # type: ignore[override]
        return Constraint.relate(self, Sense.EQ, other)

    __hash__ = None  # type: ignore[assignment]

    def value(self, values: Mapping[int, float]) -> float:
        return self.constant + sum(c * values[i] for i, c in self.terms.items())

    def __repr__(self):
        return f'LinExpr({self.terms!r}, {self.constant!r})'


@dtc.dataclass
class Constraint:
    """`expr sense rhs` with all variables moved to the left."""

    expr: LinExpr
    sense: Sense
    rhs: float
    name: str = ''

    @classmethod
    def relate(cls, left, sense: Sense, right) -> 'Constraint':
        expr = LinExpr.lift(left) - LinExpr.lift(right)
        rhs = -expr.constant
        expr.constant = 0.0
        return cls(expr, sense, rhs)

    def violation(self, values: Mapping[int, float]) -> float:
        lhs = self.expr.value(values)
        if self.sense is Sense.LE:
            return max(lhs - self.rhs, 0.0)
        if self.sense is Sense.GE:
            return max(self.rhs - lhs, 0.0)
        return abs(lhs - self.rhs)


class Model:
    def __init__(self, name: str = 'MODEL'):
        _check_name(name, 'model')
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective = LinExpr()
        self._by_name: dict[str, Variable] = {}
        self._row_names: set[str] = set()

    def __repr__(self):
        return (
            f'Model({self.name!r}, {len(self.variables)} variables, '
            f'{len(self.constraints)} constraints)'
        )

    def add_var(
        self,
        name: str,
        kind: VarKind = VarKind.CONTINUOUS,
        lb: float = 0.0,
        ub: float = math.inf,
    ) -> Variable:
        _check_name(name, 'variable')
        if name in self._by_name:
            raise ModelError(f'duplicate variable name {name!r}')
        if kind is VarKind.BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ModelError(f'inconsistent bounds [{lb}, {ub}] for {name!r}')
        var = Variable(name, len(self.variables), kind, float(lb), float(ub))
        self.variables.append(var)
        self._by_name[name] = var
        return var

    def var(self, name: str) -> Variable:
        try:
            return self._by_name[name]
        except KeyError:
            raise ModelError(f'unknown variable {name!r}') from None

    def has_var(self, name: str) -> bool:
        return name in self._by_name

    def fix(self, var: Variable, value: float) -> Variable:
        """Replace the bounds of `var` by [value, value]."""
        fixed = dtc.replace(var, lb=float(value), ub=float(value))
        self.variables[var.index] = fixed
        self._by_name[var.name] = fixed
        return fixed

    def add_constraint(self, constraint: Constraint, name: str) -> Constraint:
        if not isinstance(constraint, Constraint):
            raise ModelError(f'{name!r} is not a constraint: {constraint!r}')
        _check_name(name, 'constraint')
        if name in self._row_names:
            raise ModelError(f'duplicate constraint name {name!r}')
        n = len(self.variables)
        for i in constraint.expr.terms:
            if not 0 <= i < n:
                raise ModelError(
                    f'constraint {name!r} references undeclared variable {i}'
                )
        constraint.name = name
        self.constraints.append(constraint)
        self._row_names.add(name)
        return constraint

    def set_objective(self, expr) -> None:
        expr = LinExpr.lift(expr)
        n = len(self.variables)
        for i in expr.terms:
            if not 0 <= i < n:
                raise ModelError(f'objective references undeclared variable {i}')
        self.objective = expr

    @property
    def integral_vars(self) -> list[Variable]:
        return [v for v in self.variables if v.kind.integral]


def _check_name(name: str, what: str):
    if not name or len(name) > MAX_NAME_LENGTH or _UNSAFE_NAME.search(name):
        raise ModelError(f'{what} name {name!r} is not MPS-safe')


@dtc.dataclass(frozen=True)
class VarDecl:
    name: str
    kind: VarKind = VarKind.CONTINUOUS
    lb: float = 0.0
    ub: float = math.inf


@dtc.dataclass(frozen=True)
class RowDecl:
    """Row over variable names: sum(coef * var) sense rhs."""

    name: str
    coefs: Mapping[str, float]
    sense: Sense
    rhs: float


def build_model(
    variables: Iterable[VarDecl],
    rows: Iterable[RowDecl] = (),
    objective: Mapping[str, float] | None = None,
    objective_constant: float = 0.0,
    name: str = 'MODEL',
) -> Model:
    """Model from plain declarations; names are resolved against the variables."""
    model = Model(name)
    for decl in variables:
        model.add_var(decl.name, decl.kind, decl.lb, decl.ub)
    for row in rows:
        expr = LinExpr({model.var(v).index: c for v, c in row.coefs.items()})
        model.add_constraint(Constraint(expr, row.sense, float(row.rhs)), row.name)
    terms = {model.var(v).index: c for v, c in (objective or {}).items()}
    model.set_objective(LinExpr(terms, objective_constant))
    return model


@dtc.dataclass(frozen=True)
class ModelStats:
    continuous: int
    integer: int
    binary: int
    constraints: int
    nonzeros: int

    @property
    def integral(self) -> int:
        return self.integer + self.binary

    as_dict = dtc.asdict


def model_stats(model: Model) -> ModelStats:
    kinds = [v.kind for v in model.variables]
    return ModelStats(
        continuous=kinds.count(VarKind.CONTINUOUS),
        integer=kinds.count(VarKind.INTEGER),
        binary=kinds.count(VarKind.BINARY),
        constraints=len(model.constraints),
        nonzeros=sum(len(c.expr.terms) for c in model.constraints),
    )
