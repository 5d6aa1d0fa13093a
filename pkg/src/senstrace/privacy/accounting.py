"""Privacy costs, composition formulas, odometers and filters.

Accountants become active inside a ``with`` block. Every mechanism call
charges its cost to each source it depends on, walking the active
accountants from the innermost outward: all filters are consulted before
anything is recorded, so a refused charge leaves every total untouched.
"""
from __future__ import annotations

import contextvars
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from ..core import fmt_num
from ..errors import (
    AlphaMismatch, DeltaOutOfRange, FilterHalt, HeterogeneousCosts,
    VariantMismatch,
)


@dataclass(frozen=True)
class EpsCost:
    eps: float

    def __str__(self):
        return fmt_num(self.eps)


@dataclass(frozen=True)
class EdCost:
    eps: float
    delta: float

    def __str__(self):
        return f"({fmt_num(self.eps)}, {self.delta:g})"


@dataclass(frozen=True)
class RenyiCost:
    alpha: float
    eps: float

    def __str__(self):
        return f"({fmt_num(self.alpha)}, {fmt_num(self.eps)})"


class Decision(enum.Enum):
    CONT = "CONT"
    HALT = "HALT"


# ------------------------------------------------------------- formulas

def charge_sequential_ed(per_call_costs: Iterable[tuple[float, float]], delta_g: float) -> float:
    """Sequential (eps, delta) odometer: total eps, or inf once the deltas
    exceed the global ``delta_g``."""
    costs = list(per_call_costs)
    if sum(d for _, d in costs) > delta_g:
        return math.inf
    return sum(e for e, _ in costs)


def sequential_filter(spent: Sequence[tuple[float, float]], proposed: tuple[float, float],
                      eps_g: float, delta_g: float) -> Decision:
    eps = sum(e for e, _ in spent) + proposed[0]
    delta = sum(d for _, d in spent) + proposed[1]
    return Decision.HALT if delta > delta_g or eps > eps_g else Decision.CONT


def renyi_to_ed(cost: tuple[float, float], delta: float) -> tuple[float, float]:
    """Convert an (alpha, eps) Renyi cost to (eps', delta)."""
    alpha, eps_r = cost
    if not alpha > 1:
        raise ValueError(f"Renyi order must exceed 1, got {alpha}")
    if not 0 < delta < 1:
        raise DeltaOutOfRange(f"delta must lie in (0, 1), got {delta}")
    return eps_r + math.log(1 / delta) / (alpha - 1), delta


def charge_advanced_ed(calls: Sequence[tuple[float, float]], delta_slack: float) -> tuple[float, float]:
    """Advanced composition of ``k`` identical (eps, delta) mechanisms."""
    if not 0 < delta_slack < 1:
        raise DeltaOutOfRange(f"delta slack must lie in (0, 1), got {delta_slack}")
    k = len(calls)
    if k == 0:
        return 0.0, delta_slack
    eps, delta = calls[0]
    if any(c != (eps, delta) for c in calls):
        raise HeterogeneousCosts("advanced composition needs identical per-call costs")
    total = eps * math.sqrt(2 * k * math.log(1 / delta_slack)) + k * eps * math.expm1(eps)
    return total, k * delta + delta_slack


# ------------------------------------------------------------- accountants

_active: contextvars.ContextVar[tuple] = contextvars.ContextVar("senstrace_accountants", default=())


def active_accountants() -> tuple:
    """Innermost first."""
    return tuple(reversed(_active.get()))


class Accountant:
    """Base class: a context manager that records per-source costs."""

    label = "Accountant"

    def __init__(self):
        self.costs: dict[str, list] = {}
        self._tokens = []

    def __enter__(self):
        self._tokens.append(_active.set(_active.get() + (self,)))
        return self

    def __exit__(self, *exc):
        _active.reset(self._tokens.pop())
        return False

    # subclasses override
    def convert(self, cost):
        """Return the cost as this accountant stores it, or raise."""
        raise NotImplementedError

    def absorbs(self, cost) -> bool:
        """True if the charge stops here instead of reaching outer scopes."""
        return False

    def admit(self, source: str, cost) -> Decision:
        return Decision.CONT

    def record(self, source: str, cost) -> None:
        self.costs.setdefault(source, []).append(self.convert(cost))

    def sources(self) -> list[str]:
        return sorted(self.costs)

    def __str__(self):
        inner = ", ".join(f"{o} ↦ {self.display(o)}" for o in self.sources())
        return f"{self.label}({{{inner}}})"

    def display(self, source: str) -> str:
        return str(self.total(source))


class EpsOdometer(Accountant):
    """Pure epsilon-DP, sequential composition."""

    label = "Odometer_ε"
    regime = "eps"

    def convert(self, cost):
        if isinstance(cost, EpsCost):
            return cost.eps
        if isinstance(cost, EdCost) and cost.delta == 0:
            return cost.eps
        raise VariantMismatch(f"{type(self).__name__} cannot account for {cost!r}")

    def total(self, source: str) -> float:
        return math.fsum(self.costs.get(source, ()))

    def display(self, source):
        return repr(self.total(source))

    def to_json(self) -> dict:
        return {"regime": self.regime, "costs": {o: self.total(o) for o in self.sources()}}


def _as_ed(cost, who):
    if isinstance(cost, EpsCost):
        return (cost.eps, 0.0)
    if isinstance(cost, EdCost):
        return (cost.eps, cost.delta)
    raise VariantMismatch(f"{who} cannot account for {cost!r}; convert Renyi costs first")


class EdOdometer(Accountant):
    """(eps, delta)-DP sequential composition with a global delta."""

    label = "Odometer_(ε,δ)"
    regime = "ed"

    def __init__(self, delta: float = 0.0):
        super().__init__()
        self.delta = delta

    def convert(self, cost):
        return _as_ed(cost, type(self).__name__)

    def totals(self, source: str) -> tuple[float, float]:
        calls = self.costs.get(source, ())
        return math.fsum(e for e, _ in calls), math.fsum(d for _, d in calls)

    def total(self, source: str) -> float:
        """Odometer reading: the summed eps, or inf once the deltas exceed
        the global delta."""
        return charge_sequential_ed(self.costs.get(source, ()), self.delta)

    def display(self, source):
        eps, delta = self.totals(source)
        return f"({fmt_num(round(eps, 2))}, {delta:g})"

    def to_json(self) -> dict:
        return {"regime": self.regime, "delta": self.delta,
                "costs": {o: list(self.totals(o)) for o in self.sources()}}


class AdvEdOdometer(Accountant):
    """(eps, delta)-DP under advanced composition of identical mechanisms."""

    label = "Odometer_(ε,δ)"
    regime = "adv_ed"

    def __init__(self, delta_slack: float = 1e-5):
        super().__init__()
        if not 0 < delta_slack < 1:
            raise DeltaOutOfRange(f"delta slack must lie in (0, 1), got {delta_slack}")
        self.delta_slack = delta_slack

    def convert(self, cost):
        return _as_ed(cost, type(self).__name__)

    def admit(self, source, cost):
        calls = self.costs.get(source)
        if calls and calls[0] != self.convert(cost):
            raise HeterogeneousCosts(f"{source!r}: {cost} differs from earlier {calls[0]}")
        return Decision.CONT

    def totals(self, source: str) -> tuple[float, float]:
        return charge_advanced_ed(self.costs.get(source, []), self.delta_slack)

    total = totals

    def display(self, source):
        eps, delta = self.totals(source)
        return f"({fmt_num(round(eps, 2))}, {delta:g})"

    def to_json(self) -> dict:
        return {"regime": self.regime, "delta_slack": self.delta_slack,
                "costs": {o: list(self.totals(o)) for o in self.sources()}}


class _RenyiBase(Accountant):
    def __init__(self, alpha: Optional[float] = None):
        super().__init__()
        if alpha is not None and not alpha > 1:
            raise ValueError(f"Renyi order must exceed 1, got {alpha}")
        self.alpha = alpha

    def convert(self, cost):
        if isinstance(cost, RenyiCost):
            if self.alpha is not None and cost.alpha != self.alpha:
                raise AlphaMismatch(f"cost at alpha={cost.alpha} reached an accountant at alpha={self.alpha}")
            return cost.eps
        if isinstance(cost, EpsCost) or (isinstance(cost, EdCost) and cost.delta == 0):
            # eps-DP implies (alpha, eps)-RDP at every order
            if self.alpha is None:
                raise VariantMismatch("Renyi accountant has no order yet; cannot absorb a pure cost")
            return cost.eps
        raise VariantMismatch(f"{type(self).__name__} cannot account for {cost!r}")

    def record(self, source, cost):
        if self.alpha is None and isinstance(cost, RenyiCost):
            self.alpha = cost.alpha
        super().record(source, cost)

    def total(self, source: str) -> float:
        return math.fsum(self.costs.get(source, ()))

    def display(self, source):
        return f"({fmt_num(self.alpha)}, {self.total(source):.2f})"

    def to_json(self) -> dict:
        return {"regime": "renyi", "alpha": self.alpha,
                "costs": {o: self.total(o) for o in self.sources()}}


class RenyiOdometer(_RenyiBase):
    label = "Odometer_(α,ε)"


class RenyiFilter(_RenyiBase):
    """Halts before any source's Renyi total would exceed ``eps``."""

    label = "Filter_(α,ε)"

    def __init__(self, alpha: float, eps: float):
        super().__init__(alpha)
        self.budget = eps
        self.halted = False

    def admit(self, source, cost):
        if self.halted:
            return Decision.HALT
        eps = self.convert(cost)
        if self.total(source) + eps > self.budget:
            return Decision.HALT
        return Decision.CONT

    def to_json(self) -> dict:
        out = super().to_json()
        out["budget"] = self.budget
        return out


class EdFilter(Accountant):
    """Sequential (eps, delta) filter with budget (eps_g, delta_g)."""

    label = "Filter_(ε,δ)"
    regime = "ed"

    def __init__(self, eps: float, delta: float = 0.0):
        super().__init__()
        self.eps = eps
        self.delta = delta
        self.halted = False

    def convert(self, cost):
        return _as_ed(cost, type(self).__name__)

    def admit(self, source, cost):
        if self.halted:
            return Decision.HALT
        return sequential_filter(self.costs.get(source, ()), self.convert(cost), self.eps, self.delta)

    def totals(self, source: str) -> tuple[float, float]:
        calls = self.costs.get(source, ())
        return math.fsum(e for e, _ in calls), math.fsum(d for _, d in calls)

    total = totals

    def to_json(self) -> dict:
        return {"regime": self.regime, "budget": [self.eps, self.delta],
                "costs": {o: list(self.totals(o)) for o in self.sources()}}


EpsFilter = EdFilter


def filter_check(flt, proposed, source: Optional[str] = None) -> Decision:
    """Would charging ``proposed`` to ``source`` be refused?

    Without a source the most-charged source is checked, which is the one
    that reaches the budget first.
    """
    cost = _coerce(proposed, flt)
    if source is None:
        names = flt.sources() or ["*"]
        return Decision.HALT if any(flt.admit(o, cost) is Decision.HALT for o in names) else Decision.CONT
    return flt.admit(source, cost)


def _coerce(proposed, acct):
    if isinstance(proposed, (EpsCost, EdCost, RenyiCost)):
        return proposed
    if isinstance(acct, _RenyiBase):
        return RenyiCost(acct.alpha, float(proposed[1] if isinstance(proposed, tuple) else proposed))
    if isinstance(proposed, tuple):
        return EdCost(*map(float, proposed))
    return EpsCost(float(proposed))


class RenyiDP(Accountant):
    """Collect Renyi costs inside the block; on exit, convert each source's
    total to (eps, delta) and charge it to the enclosing accountants.

    Non-Renyi costs pass straight through to the enclosing scopes.
    """

    label = "RenyiDP"

    def __init__(self, delta: float, alpha: Optional[float] = None):
        super().__init__()
        if not 0 < delta < 1:
            raise DeltaOutOfRange(f"delta must lie in (0, 1), got {delta}")
        self.delta = delta
        self.alpha = alpha
        self.converted: dict[str, tuple[float, float]] = {}

    def absorbs(self, cost):
        return isinstance(cost, RenyiCost)

    def convert(self, cost):
        if isinstance(cost, RenyiCost):
            if self.alpha is not None and cost.alpha != self.alpha:
                raise AlphaMismatch(f"cost at alpha={cost.alpha} inside a block at alpha={self.alpha}")
            return cost
        return None

    def record(self, source, cost):
        if isinstance(cost, RenyiCost):
            self.alpha = cost.alpha
            self.costs.setdefault(source, []).append(cost.eps)

    def total(self, source):
        return math.fsum(self.costs.get(source, ()))

    def __exit__(self, *exc):
        super().__exit__(*exc)
        if exc[0] is None:
            for source in self.sources():
                eps, delta = renyi_to_ed((self.alpha, self.total(source)), self.delta)
                self.converted[source] = (eps, delta)
                charge([source], EdCost(eps, delta))
        return False


# ------------------------------------------------------------- charging

def charge(sources: Iterable[str], cost) -> None:
    """Charge ``cost`` to every source in all active accountants.

    Raises :class:`FilterHalt` without recording anything when any active
    filter refuses the charge for any source.
    """
    sources = sorted(set(sources))
    if not sources:
        return
    chain = []
    for acct in active_accountants():
        acct.convert(cost)  # raises on variant / order mismatch
        chain.append(acct)
        if acct.absorbs(cost):
            break
    for acct in chain:
        for source in sources:
            if acct.admit(source, cost) is Decision.HALT:
                acct.halted = True
                raise FilterHalt(source, cost, _budget(acct))
    for acct in chain:
        for source in sources:
            acct.record(source, cost)


def _budget(acct):
    if isinstance(acct, EdFilter):
        return (acct.eps, acct.delta)
    if isinstance(acct, RenyiFilter):
        return (acct.alpha, acct.budget)
    return None


# ------------------------------------------------------------- functional API

def ed_odo(f, x, delta: float = 0.0):
    with EdOdometer(delta) as odo:
        out = f(x)
    return out, {o: odo.totals(o) for o in odo.sources()}


def renyi_odo(f, x, alpha: Optional[float] = None):
    with RenyiOdometer(alpha) as odo:
        out = f(x)
    return out, {o: (odo.alpha, odo.total(o)) for o in odo.sources()}


def ed_filter(f, x, budget: tuple[float, float]):
    with EdFilter(*budget):
        return f(x)


def renyi_filter(f, x, budget: tuple[float, float]):
    with RenyiFilter(*budget):
        return f(x)


def conv_renyi(f, x, delta: float):
    with RenyiDP(delta):
        return f(x)
