"""Domain types for the core language: extended reals, sensitivity
environments, metrics, expressions, runtime values and the store."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union

from .errors import DanglingLocation

INF = math.inf

# ExtReal is represented by a plain float: finite values are >= 0, and
# math.inf stands for the infinite sensitivity.


def check_ext(q: float) -> float:
    q = float(q)
    if math.isnan(q) or q < 0:
        raise ValueError(f"extended real must be >= 0 or inf, got {q}")
    return q


def ext_add(a: float, b: float) -> float:
    return a + b


def ext_mul(a: float, b: float) -> float:
    # 0 * inf = 0: a non-sensitive zero annihilates sensitivity.
    if a == 0 or b == 0:
        return 0.0
    return a * b


def truncate(r_prime: float, r: float) -> float:
    """0 when ``r_prime`` is zero, else ``r``."""
    return 0.0 if r_prime == 0 else r


def fmt_num(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


class SensEnv(Mapping[str, float]):
    """Immutable map from source identifiers to sensitivities.

    Missing sources have sensitivity 0 and zero entries are never stored,
    so structural equality coincides with semantic equality.
    """

    __slots__ = ("_items", "_hash")

    def __init__(self, items: Mapping[str, float] | Iterable[tuple[str, float]] = ()):
        data = {}
        pairs = items.items() if isinstance(items, Mapping) else items
        for source, q in pairs:
            if not isinstance(source, str) or not source:
                raise ValueError(f"source identifiers must be non-empty strings, got {source!r}")
            q = check_ext(q)
            if q != 0:
                data[source] = q
        self._items = data
        self._hash = None

    def __getitem__(self, source: str) -> float:
        return self._items[source]

    def get(self, source, default=0.0):
        return self._items.get(source, default)

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other) -> bool:
        if isinstance(other, SensEnv):
            return self._items == other._items
        if isinstance(other, Mapping):
            return self == SensEnv(other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._items.items()))
        return self._hash

    def __repr__(self) -> str:
        return f"SensEnv({self._items!r})"

    def __str__(self) -> str:
        inner = ", ".join(f"{o}:{fmt_num(q)}" for o, q in sorted(self._items.items()))
        return "{" + inner + "}"

    @property
    def is_zero(self) -> bool:
        return not self._items

    def __add__(self, other: SensEnv) -> SensEnv:
        return senv_add(self, other)

    def scale(self, c: float) -> SensEnv:
        return senv_scale(c, self)

    def dot(self, other: SensEnv) -> float:
        return senv_dot(self, other)

    def max(self) -> float:
        return max(self._items.values(), default=0.0)

    def to_json(self) -> dict:
        return {o: ("inf" if math.isinf(q) else q) for o, q in sorted(self._items.items())}


Z = SensEnv()


def senv_add(a: SensEnv, b: SensEnv) -> SensEnv:
    out = dict(a.items())
    for o, q in b.items():
        out[o] = ext_add(out.get(o, 0.0), q)
    return SensEnv(out)


def senv_scale(c: float, s: SensEnv) -> SensEnv:
    c = check_ext(c)
    return SensEnv((o, ext_mul(c, q)) for o, q in s.items())


def senv_dot(distances: SensEnv, coefficients: SensEnv) -> float:
    total = 0.0
    for o in set(distances) | set(coefficients):
        total = ext_add(total, ext_mul(distances.get(o), coefficients.get(o)))
    return total


def scale_factor(c: float, m: "Metric") -> float:
    """Sensitivity multiplier for scaling a value of metric ``m`` by ``c``.

    Under the absolute-difference metric the factor is ``|c|``. Under the
    discrete, bottom and top metrics a non-zero scalar can never shrink a
    difference below 1, so the factor is floored at 1.
    """
    if c == 0:
        return 0.0
    if m is Metric.DIFF:
        return abs(c)
    return max(abs(c), 1.0)


def senv_truncate(s: SensEnv, r: float) -> SensEnv:
    return SensEnv((o, truncate(q, r)) for o, q in s.items())


class Metric(enum.Enum):
    BOT = "bot"
    DIFF = "diff"
    DISC = "disc"
    TOP = "top"

    def __str__(self) -> str:
        return self.value

    def leq(self, other: Metric) -> bool:
        return self is other or self is Metric.BOT or other is Metric.TOP

    def join(self, other: Metric) -> Metric:
        return metric_join(self, other)

    def meet(self, other: Metric) -> Metric:
        return metric_meet(self, other)

    @classmethod
    def parse(cls, text: str) -> Metric:
        return cls(text.lower())


def metric_join(a: Metric, b: Metric) -> Metric:
    if a.leq(b):
        return b
    if b.leq(a):
        return a
    return Metric.TOP


def metric_meet(a: Metric, b: Metric) -> Metric:
    if a.leq(b):
        return a
    if b.leq(a):
        return b
    return Metric.BOT


def within_distance(r1: float, r2: float, bound: float, m: Metric) -> bool:
    """Do ``r1`` and ``r2`` lie within ``bound`` of each other under ``m``?"""
    if math.isinf(bound):
        return True
    if m is Metric.DIFF:
        return abs(r1 - r2) <= bound
    if m is Metric.DISC:
        return 0 <= bound if r1 == r2 else 1 <= bound
    diff = within_distance(r1, r2, bound, Metric.DIFF)
    disc = within_distance(r1, r2, bound, Metric.DISC)
    return (diff and disc) if m is Metric.BOT else (diff or disc)


# ---------------------------------------------------------------- syntax

class Op(enum.Enum):
    PLUS = "+"
    TIMES_L = "scalel"
    TIMES_R = "scaler"


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable names must be non-empty")


@dataclass(frozen=True)
class Real:
    value: float


@dataclass(frozen=True)
class BinOp:
    op: Op
    left: Expr
    right: Expr


@dataclass(frozen=True)
class If0:
    guard: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True)
class Pair:
    first: Expr
    second: Expr


@dataclass(frozen=True)
class Proj:
    index: int
    expr: Expr

    def __post_init__(self):
        if self.index not in (1, 2):
            raise ValueError(f"projection index must be 1 or 2, got {self.index}")


@dataclass(frozen=True)
class Lam:
    param: str
    body: Expr

    def __post_init__(self):
        if not self.param:
            raise ValueError("parameter names must be non-empty")


@dataclass(frozen=True)
class App:
    fn: Expr
    arg: Expr


@dataclass(frozen=True)
class Ref:
    expr: Expr


@dataclass(frozen=True)
class Read:
    expr: Expr


@dataclass(frozen=True)
class Write:
    target: Expr
    value: Expr


Expr = Union[Var, Real, BinOp, If0, Pair, Proj, Lam, App, Ref, Read, Write]


def plus(a: Expr, b: Expr) -> BinOp:
    return BinOp(Op.PLUS, a, b)


def scale_l(a: Expr, b: Expr) -> BinOp:
    return BinOp(Op.TIMES_L, a, b)


def scale_r(a: Expr, b: Expr) -> BinOp:
    return BinOp(Op.TIMES_R, a, b)


# ---------------------------------------------------------------- values

@dataclass(frozen=True)
class TaggedReal:
    value: float
    senv: SensEnv = Z
    metric: Metric = Metric.DISC

    def __str__(self) -> str:
        return f"{fmt_num(self.value)}@{self.senv}#{self.metric}"


@dataclass(frozen=True)
class PairValue:
    first: Value
    second: Value

    def __str__(self) -> str:
        return f"<{self.first},{self.second}>"


@dataclass(frozen=True, eq=False)
class Closure:
    param: str
    body: Expr
    env: Mapping[str, Value]

    def __str__(self) -> str:
        return "<closure>"


@dataclass(frozen=True)
class Loc:
    index: int

    def __str__(self) -> str:
        return f"loc({self.index})"


Value = Union[TaggedReal, PairValue, Closure, Loc]
Env = Mapping[str, Value]


def render_value(v: Value) -> str:
    return str(v)


def kind(v) -> str:
    return {
        TaggedReal: "real",
        PairValue: "pair",
        Closure: "closure",
        Loc: "location",
    }.get(type(v), type(v).__name__)


@dataclass
class Store:
    """Mutable heap confined to one evaluation. Allocation is a monotone
    counter so paired runs of one program allocate identical locations."""

    cells: list = field(default_factory=list)

    def alloc(self, v: Value) -> Loc:
        self.cells.append(v)
        return Loc(len(self.cells) - 1)

    def read(self, loc: Loc) -> Value:
        if not 0 <= loc.index < len(self.cells):
            raise DanglingLocation(loc.index)
        return self.cells[loc.index]

    def write(self, loc: Loc, v: Value) -> None:
        if not 0 <= loc.index < len(self.cells):
            raise DanglingLocation(loc.index)
        self.cells[loc.index] = v

    def copy(self) -> Store:
        return Store(list(self.cells))

    def __len__(self) -> int:
        return len(self.cells)
