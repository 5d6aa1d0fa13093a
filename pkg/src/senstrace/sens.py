"""Host-level sensitive values: scalars and vectors that carry a
sensitivity environment and a distance metric through ordinary Python
arithmetic.

Plain numbers mixed into an operation are non-sensitive constants. They
are tagged with the bottom metric, since a value that never changes
satisfies both the absolute-difference and the discrete relation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from numbers import Real as _Number
from typing import Callable, Optional, Sequence

import numpy as np

from .core import INF, Z, Metric, SensEnv, fmt_num, metric_join, scale_factor
from .errors import NonPositiveBound, ProbeEscape, SensitiveGuard, UnboundedSum

L1_NORM = "l1"
L2_NORM = "l2"


@dataclass(frozen=True)
class SensScalar:
    value: float
    senv: SensEnv = Z
    metric: Metric = Metric.BOT
    # "l1" / "l2" when the value was derived from a clipped vector
    norm: Optional[str] = None

    def __str__(self) -> str:
        return f"Sensitive({fmt_num(self.value)}, {self.senv}, {self.metric})"

    @property
    def sensitive(self) -> bool:
        return not self.senv.is_zero

    def _guard(self, what: str):
        if self.sensitive:
            raise SensitiveGuard(f"{what} on a value sensitive in {sorted(self.senv)}")
        return self.value

    def __bool__(self) -> bool:
        return bool(self._guard("branching"))

    def __float__(self) -> float:
        return float(self._guard("conversion to float"))

    def __lt__(self, other):
        return self._guard("comparison") < _plain(other, "comparison")

    def __le__(self, other):
        return self._guard("comparison") <= _plain(other, "comparison")

    def __gt__(self, other):
        return self._guard("comparison") > _plain(other, "comparison")

    def __ge__(self, other):
        return self._guard("comparison") >= _plain(other, "comparison")

    def __add__(self, other):
        return s_add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return s_mul(-1.0, self)

    def __sub__(self, other):
        return s_add(self, s_mul(-1.0, other))

    def __rsub__(self, other):
        return s_add(other, s_mul(-1.0, self))

    def __mul__(self, other):
        return s_mul(self, other)

    def __rmul__(self, other):
        return s_mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, SensScalar) and other.sensitive:
            return SensScalar(self.value / other.value,
                              SensEnv((o, INF) for o in self.senv + other.senv), Metric.TOP)
        c = float(other.value if isinstance(other, SensScalar) else other)
        return s_mul(1.0 / c, self)


def _plain(x, what):
    if isinstance(x, SensScalar):
        return x._guard(what)
    return x


def as_scalar(x) -> SensScalar:
    if isinstance(x, SensScalar):
        return x
    if isinstance(x, _Number):
        return SensScalar(float(x))
    raise TypeError(f"cannot treat {type(x).__name__} as a sensitive scalar")


def lift_scalar(value: float, source: str, metric: Metric = Metric.DIFF) -> SensScalar:
    """Wrap data read from ``source``; the value is 1-sensitive in it."""
    return SensScalar(float(value), SensEnv({source: 1.0}), metric)


def _join_norm(a, b):
    if L2_NORM in (a, b):
        return L2_NORM
    return a or b


def s_add(a, b) -> SensScalar:
    a, b = as_scalar(a), as_scalar(b)
    return SensScalar(a.value + b.value, a.senv + b.senv,
                      metric_join(a.metric, b.metric), _join_norm(a.norm, b.norm))


def s_mul(a, b) -> SensScalar:
    a, b = as_scalar(a), as_scalar(b)
    value = a.value * b.value
    if not a.sensitive:
        return SensScalar(value, b.senv.scale(scale_factor(a.value, b.metric)), b.metric, b.norm)
    if not b.sensitive:
        return SensScalar(value, a.senv.scale(scale_factor(b.value, a.metric)), a.metric, a.norm)
    # product of two sensitive values has unbounded sensitivity
    return SensScalar(value, SensEnv((o, INF) for o in a.senv + b.senv),
                      metric_join(a.metric, b.metric), _join_norm(a.norm, b.norm))


# ------------------------------------------------------------------ vectors

@dataclass(frozen=True)
class VecMetric:
    kind: str  # "L1", "L2" or "LInf"
    inner: Metric = Metric.DIFF

    def __post_init__(self):
        if self.kind not in ("L1", "L2", "LInf"):
            raise ValueError(f"unknown vector metric {self.kind!r}")
        if self.kind == "LInf" and self.inner is not Metric.DIFF:
            raise ValueError("LInf is defined over the absolute-difference metric")

    def __str__(self) -> str:
        return "LInf" if self.kind == "LInf" else f"{self.kind}({self.inner})"


LINF = VecMetric("LInf")
L1 = VecMetric("L1")
L2 = VecMetric("L2")


@dataclass(frozen=True, eq=False)
class SensVector:
    """A dense real vector tagged as a whole with one sensitivity environment.

    ``bound`` is the clipping radius recorded by :func:`clip_l1`,
    :func:`clip_l2` or :func:`clipped_sum`; it is ``None`` for unclipped
    vectors.
    """

    values: np.ndarray
    senv: SensEnv = Z
    metric: VecMetric = LINF
    bound: Optional[float] = None

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1:
            raise ValueError("sensitive vectors are one-dimensional")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    def __str__(self) -> str:
        return f"Sensitive(<vector[{len(self)}]>, {self.senv}, {self.metric})"

    @property
    def sensitivity(self) -> SensEnv:
        """Per-source bound on the vector distance under ``metric``."""
        if self.bound is None:
            raise UnboundedSum("an unclipped vector has no finite norm bound")
        return self.senv.scale(self.bound)


def lift_vector(values: Sequence[float], source: str) -> SensVector:
    return SensVector(np.asarray(values, dtype=float), SensEnv({source: 1.0}), LINF)


def _clip(v: SensVector, bound: float, order: int, metric: VecMetric) -> SensVector:
    if not bound > 0:
        raise NonPositiveBound(f"clipping bound must be positive, got {bound}")
    if v.metric not in (LINF, metric):
        raise ValueError(f"cannot clip a {v.metric} vector to {metric}")
    norm = float(np.linalg.norm(v.values, ord=order))
    values = v.values * (bound / norm) if norm > bound else v.values
    return SensVector(values, v.senv, metric, float(bound))


def clip_l2(v: SensVector, bound: float) -> SensVector:
    return _clip(v, bound, 2, L2)


def clip_l1(v: SensVector, bound: float) -> SensVector:
    return _clip(v, bound, 1, L1)


def vec_sum(v: SensVector) -> SensScalar:
    """Sum the elements of a clipped vector into a scalar.

    An L1 ball of radius b bounds the sum by b. For an L2 ball the sum is
    bounded by b * sqrt(len) and the result remains usable only by the
    Gaussian mechanisms.
    """
    if v.metric == LINF or v.bound is None:
        raise UnboundedSum("summing an unclipped vector has no finite sensitivity")
    total = float(np.sum(v.values))
    if v.metric.kind == "L1":
        return SensScalar(total, v.senv.scale(v.bound), Metric.DIFF, L1_NORM)
    factor = v.bound * math.sqrt(len(v))
    return SensScalar(total, v.senv.scale(factor), Metric.DIFF, L2_NORM)


def clipped_sum(rows, senv: SensEnv, bound: float) -> SensVector:
    """Clip each row to L2 norm ``bound`` and add the rows up.

    ``rows`` holds one contribution per individual and ``senv`` tags the
    dataset, so one unit of distance in a source adds or removes a single
    row and moves the sum by at most ``bound`` in L2.
    """
    if not bound > 0:
        raise NonPositiveBound(f"clipping bound must be positive, got {bound}")
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    norms = np.linalg.norm(rows, axis=1)
    factors = np.minimum(1.0, bound / np.where(norms > 0, norms, 1.0))
    return SensVector((rows * factors[:, None]).sum(axis=0), senv, L2, float(bound))


_probe_ids = itertools.count()


def s_map(f: Callable[[SensScalar], SensScalar], v: SensVector) -> SensVector:
    """Apply ``f`` elementwise, measuring its sensitivity with a probe source.

    Each element is passed to ``f`` tagged 1-sensitive in a fresh probe
    source; the largest probe coefficient seen in the outputs is the
    scaling factor applied to ``v``'s environment. Other sensitive sources
    that ``f`` pulls in are charged once per element.
    """
    if v.metric != LINF:
        raise ValueError(f"map requires an LInf vector, got {v.metric}")
    probe = f"__probe{next(_probe_ids)}"
    outputs = []
    k = 0.0
    extra = Z
    for x in v.values:
        out = f(SensScalar(float(x), SensEnv({probe: 1.0}), Metric.DIFF))
        if isinstance(out, _Number) and not isinstance(out, bool):
            out = SensScalar(float(out))
        if not isinstance(out, SensScalar):
            raise ProbeEscape(f"mapped function returned {type(out).__name__}, not a scalar")
        k = max(k, out.senv.get(probe))
        extra = extra + SensEnv((o, q) for o, q in out.senv.items() if o != probe)
        outputs.append(out.value)
    return SensVector(np.asarray(outputs, dtype=float), v.senv.scale(k) + extra, LINF)
