"""Big-step, step-indexed evaluation of core expressions with dynamic
sensitivity tags.

The evaluator runs on an explicit work stack, so deeply nested programs
fail with :class:`DepthExceeded` instead of exhausting the Python stack.
The tag computations live in overridable methods; the harness subclasses
:class:`Evaluator` to build deliberately broken variants.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .core import (
    Z, App, BinOp, Closure, Env, Expr, If0, Lam, Loc, Metric, Op, Pair,
    PairValue, Proj, Read, Real, Ref, SensEnv, Store, TaggedReal, Value, Var,
    Write, kind, metric_join, scale_factor,
)
from .errors import (
    DepthExceeded, SensitiveGuard, SensitiveScalar, TypeMismatch,
    UnboundVariable,
)

DEFAULT_MAX_DEPTH = 100_000


@dataclass
class EvalResult:
    store: Store
    value: Value
    steps: int

    @property
    def tagged(self) -> TaggedReal:
        if not isinstance(self.value, TaggedReal):
            raise TypeMismatch("real", kind(self.value))
        return self.value


# work-stack instruction tags
_EVAL, _BINOP, _IF, _PAIR, _PROJ, _APP, _REF, _READ, _WRITE = range(9)


class Evaluator:
    """Reference implementation of every evaluation rule."""

    name = "reference"

    def __init__(self, max_depth: int = DEFAULT_MAX_DEPTH):
        self.max_depth = max_depth

    # -- tag rules -------------------------------------------------------

    def plus(self, a: TaggedReal, b: TaggedReal) -> TaggedReal:
        return TaggedReal(a.value + b.value, a.senv + b.senv, metric_join(a.metric, b.metric))

    def scale(self, scalar: TaggedReal, x: TaggedReal) -> TaggedReal:
        factor = scale_factor(scalar.value, x.metric)
        return TaggedReal(scalar.value * x.value, x.senv.scale(factor), x.metric)

    def check_scalar(self, scalar: TaggedReal) -> None:
        if not scalar.senv.is_zero:
            raise SensitiveScalar(
                f"scalar operand {scalar} depends on sensitive sources {sorted(scalar.senv)}"
            )

    def check_guard(self, guard: TaggedReal) -> None:
        if not guard.senv.is_zero:
            raise SensitiveGuard(
                f"conditional guard {guard} depends on sensitive sources {sorted(guard.senv)}"
            )

    # -- machine -----------------------------------------------------------

    def eval(self, env: Env, store: Store, expr: Expr) -> EvalResult:
        """Evaluate ``expr``. ``store`` is updated in place and returned."""
        todo: list[tuple] = [(_EVAL, expr, env)]
        vals: list[Value] = []
        steps = 0
        limit = self.max_depth

        while todo:
            if len(todo) > limit:
                raise DepthExceeded(limit)
            instr = todo.pop()
            tag = instr[0]

            if tag == _EVAL:
                _, e, rho = instr
                t = type(e)
                if t is Var:
                    try:
                        vals.append(rho[e.name])
                    except KeyError:
                        raise UnboundVariable(e.name) from None
                elif t is Real:
                    vals.append(TaggedReal(float(e.value), Z, Metric.DISC))
                elif t is BinOp:
                    todo += [(_BINOP, e.op), (_EVAL, e.right, rho), (_EVAL, e.left, rho)]
                elif t is If0:
                    todo += [(_IF, e, rho), (_EVAL, e.guard, rho)]
                elif t is Pair:
                    todo += [(_PAIR,), (_EVAL, e.second, rho), (_EVAL, e.first, rho)]
                elif t is Proj:
                    todo += [(_PROJ, e.index), (_EVAL, e.expr, rho)]
                elif t is Lam:
                    vals.append(Closure(e.param, e.body, rho))
                elif t is App:
                    todo += [(_APP,), (_EVAL, e.arg, rho), (_EVAL, e.fn, rho)]
                elif t is Ref:
                    todo += [(_REF,), (_EVAL, e.expr, rho)]
                elif t is Read:
                    todo += [(_READ,), (_EVAL, e.expr, rho)]
                elif t is Write:
                    todo += [(_WRITE,), (_EVAL, e.value, rho), (_EVAL, e.target, rho)]
                else:
                    raise TypeError(f"not an expression: {e!r}")

            elif tag == _BINOP:
                b = _real(vals.pop())
                a = _real(vals.pop())
                op = instr[1]
                if op is Op.PLUS:
                    vals.append(self.plus(a, b))
                elif op is Op.TIMES_L:
                    self.check_scalar(a)
                    vals.append(self.scale(a, b))
                else:
                    self.check_scalar(b)
                    vals.append(self.scale(b, a))

            elif tag == _IF:
                _, e, rho = instr
                guard = _real(vals.pop())
                self.check_guard(guard)
                todo.append((_EVAL, e.then if guard.value == 0 else e.orelse, rho))

            elif tag == _PAIR:
                second = vals.pop()
                vals.append(PairValue(vals.pop(), second))

            elif tag == _PROJ:
                v = vals.pop()
                if not isinstance(v, PairValue):
                    raise TypeMismatch("pair", kind(v))
                vals.append(v.first if instr[1] == 1 else v.second)

            elif tag == _APP:
                arg = vals.pop()
                fn = vals.pop()
                if not isinstance(fn, Closure):
                    raise TypeMismatch("closure", kind(fn))
                steps += 1
                body_env = dict(fn.env)
                body_env[fn.param] = arg
                todo.append((_EVAL, fn.body, body_env))

            elif tag == _REF:
                vals.append(store.alloc(vals.pop()))

            elif tag == _READ:
                vals.append(store.read(_loc(vals.pop())))

            elif tag == _WRITE:
                v = vals.pop()
                loc = _loc(vals.pop())
                store.write(loc, v)
                vals.append(v)

        assert len(vals) == 1
        return EvalResult(store, vals[0], steps)


def _real(v: Value) -> TaggedReal:
    if not isinstance(v, TaggedReal):
        raise TypeMismatch("real", kind(v))
    return v


def _loc(v: Value) -> Loc:
    if not isinstance(v, Loc):
        raise TypeMismatch("location", kind(v))
    return v


REFERENCE = Evaluator()


def evaluate(env: Env, store: Store, expr: Expr, evaluator: Evaluator | None = None) -> EvalResult:
    return (evaluator or REFERENCE).eval(env, store, expr)


def initial_env(inputs: Mapping[str, tuple[float, str, Metric]]) -> dict[str, TaggedReal]:
    """Bind each input name to a value that is 1-sensitive in its source."""
    return {
        name: TaggedReal(float(r), SensEnv({source: 1.0}), metric)
        for name, (r, source, metric) in inputs.items()
    }


def eval_entry(
    inputs: Mapping[str, tuple[float, str, Metric]],
    program: Expr,
    evaluator: Evaluator | None = None,
) -> EvalResult:
    return evaluate(initial_env(inputs), Store(), program, evaluator)
