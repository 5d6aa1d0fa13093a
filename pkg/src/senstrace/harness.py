"""Paired-execution soundness checks for the dynamic analysis.

For a program and a per-source distance bound, repeatedly evaluate it on
two neighbouring input environments and confirm that both runs take the
same number of function applications, carry the same analysis tags, and
produce results no further apart than the analysis predicts.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .core import (
    App, BinOp, Closure, Lam, Loc, Metric, Op, Pair, PairValue, Proj, Read, Real, Ref,
    SensEnv, Store, TaggedReal, Value, Var, Write,
    fmt_num, kind, within_distance,
)
from .errors import AnalysisError, SensTraceError, SensitiveGuard, SensitiveScalar
from .evaluator import REFERENCE, Evaluator, initial_env
from .frontend import inputs_from_json, inputs_to_json, parse_program

REL_TOL = 1e-9
ABS_TOL = 1e-12
DISC_SPREAD = 10.0
CORPUS_DIR = Path(__file__).parent / "corpus"


class BaseEvaluationFailed(SensTraceError):
    def __init__(self, cause: Exception):
        super().__init__(f"program fails on its base inputs: {type(cause).__name__}: {cause}")
        self.cause = cause


class CorpusError(SensTraceError):
    pass


@dataclass
class NeighborSpec:
    inputs: dict  # name -> (value, source, metric)
    distances: SensEnv
    trials: Optional[int] = None
    expect_error: Optional[str] = None

    def __post_init__(self):
        for o, q in self.distances.items():
            if math.isinf(q):
                raise ValueError(f"distance for source {o!r} must be finite")

    @classmethod
    def from_json(cls, doc: Mapping) -> NeighborSpec:
        return cls(
            inputs=inputs_from_json(doc.get("inputs", {})),
            distances=SensEnv({o: float(q) for o, q in doc.get("distances", {}).items()}),
            trials=doc.get("trials"),
            expect_error=doc.get("expect_error"),
        )

    def to_json(self) -> dict:
        out = {"inputs": inputs_to_json(self.inputs), "distances": dict(self.distances)}
        if self.trials is not None:
            out["trials"] = self.trials
        if self.expect_error is not None:
            out["expect_error"] = self.expect_error
        return out


@dataclass
class PreservationReport:
    trials: int = 0
    violations: list = field(default_factory=list)
    step_mismatches: list = field(default_factory=list)
    tag_mismatches: list = field(default_factory=list)
    max_distance: float = 0.0
    base_tags: object = None

    @property
    def passed(self) -> bool:
        return not (self.violations or self.step_mismatches or self.tag_mismatches)

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "passed": self.passed,
            "max_distance": self.max_distance,
            "violations": self.violations,
            "step_mismatches": self.step_mismatches,
            "tag_mismatches": self.tag_mismatches,
        }


# ------------------------------------------------------------ relations

def within_tolerance(r1: float, r2: float, bound: float, m: Metric) -> bool:
    """``within_distance`` with slack for floating-point rounding on the
    absolute-difference side; discrete checks stay exact."""
    slack = bound * (1 + REL_TOL) + ABS_TOL if math.isfinite(bound) else bound
    diff = within_distance(r1, r2, slack, Metric.DIFF)
    disc = within_distance(r1, r2, bound, Metric.DISC)
    if m is Metric.DIFF:
        return diff
    if m is Metric.DISC:
        return disc
    return (diff and disc) if m is Metric.BOT else (diff or disc)


def tags_of(v: Value):
    """The analysis-visible skeleton of a value."""
    if isinstance(v, TaggedReal):
        return (v.senv, v.metric)
    if isinstance(v, PairValue):
        return ("pair", tags_of(v.first), tags_of(v.second))
    if isinstance(v, Loc):
        return ("loc", v.index)
    if isinstance(v, Closure):
        return ("closure", v.param, id(v.body))
    return (kind(v),)


def _relate(v1: Value, v2: Value, dist: SensEnv, path: str, out: list) -> float:
    """Append (path, problem) entries to ``out``; return the largest
    observed absolute difference between related reals."""
    if type(v1) is not type(v2):
        out.append(("tag", path, f"{kind(v1)} vs {kind(v2)}"))
        return 0.0
    if isinstance(v1, TaggedReal):
        if v1.senv != v2.senv or v1.metric is not v2.metric:
            out.append(("tag", path, f"{v1} vs {v2}"))
            return 0.0
        bound = dist.dot(v1.senv)
        if not within_tolerance(v1.value, v2.value, bound, v1.metric):
            out.append(("distance", path, {"r1": v1.value, "r2": v2.value,
                                           "observed": abs(v1.value - v2.value),
                                           "bound": bound, "metric": v1.metric.value}))
        return abs(v1.value - v2.value)
    if isinstance(v1, PairValue):
        return max(_relate(v1.first, v2.first, dist, path + ".1", out),
                   _relate(v1.second, v2.second, dist, path + ".2", out))
    if isinstance(v1, Loc):
        if v1.index != v2.index:
            out.append(("tag", path, f"{v1} vs {v2}"))
        return 0.0
    if isinstance(v1, Closure):
        # closures are related extensionally; only their code can be compared here
        if v1.param != v2.param or v1.body is not v2.body:
            out.append(("tag", path, "closures with different code"))
    return 0.0


def relate_results(r1, r2, dist: SensEnv) -> tuple[list, float]:
    problems: list = []
    observed = _relate(r1.value, r2.value, dist, "value", problems)
    if len(r1.store) != len(r2.store):
        problems.append(("tag", "store", f"{len(r1.store)} vs {len(r2.store)} cells"))
    else:
        for i, (a, b) in enumerate(zip(r1.store.cells, r2.store.cells)):
            observed = max(observed, _relate(a, b, dist, f"store[{i}]", problems))
    return problems, observed


# ------------------------------------------------------------ sampling

def perturb(inputs: dict, dist: SensEnv, rng: np.random.Generator) -> tuple[dict, dict]:
    """Draw two input environments related at distance ``dist``.

    Absolute-difference inputs move by at most ``dist[source]`` between the
    two draws, half the time by exactly that much. Discrete inputs may only
    change when the allowed distance reaches 1; they are then kept or
    replaced by a fresh draw with probability one half.
    """
    first, second = {}, {}
    for name, (r, source, metric) in inputs.items():
        s = dist.get(source)
        if metric is Metric.DIFF:
            a = r + rng.uniform(-s / 2, s / 2) if s > 0 else r
            if s > 0 and rng.random() < 0.5:
                b = a + (s if rng.random() < 0.5 else -s)
            else:
                b = a + rng.uniform(-s, s) if s > 0 else a
        else:
            a = b = r
            if s >= 1:
                if rng.random() < 0.5:
                    a = float(np.round(r + rng.uniform(-DISC_SPREAD, DISC_SPREAD), 3))
                b = a if rng.random() < 0.5 else float(np.round(r + rng.uniform(-DISC_SPREAD, DISC_SPREAD), 3))
        first[name] = (float(a), source, metric)
        second[name] = (float(b), source, metric)
    return first, second


def _run(evaluator, inputs, program):
    return evaluator.eval(initial_env(inputs), Store(), program)


def check_preservation(program, spec: NeighborSpec, trials: int = 1000, seed: int = 0,
                       evaluator: Evaluator = REFERENCE, stop_early: bool = False) -> PreservationReport:
    """Empirically test metric preservation of ``program`` around ``spec``'s inputs."""
    if trials < 1:
        raise ValueError("trials must be positive")
    try:
        base = _run(evaluator, spec.inputs, program)
    except AnalysisError as exc:
        raise BaseEvaluationFailed(exc) from exc
    report = PreservationReport(base_tags=tags_of(base.value))
    dist = spec.distances

    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        in1, in2 = perturb(spec.inputs, dist, rng)
        report.trials += 1
        record = {"seed": [seed, t], "inputs1": inputs_to_json(in1), "inputs2": inputs_to_json(in2)}
        try:
            r1 = _run(evaluator, in1, program)
            r2 = _run(evaluator, in2, program)
        except AnalysisError as exc:
            report.violations.append({**record, "error": f"{type(exc).__name__}: {exc}"})
            if stop_early:
                break
            continue
        if r1.steps != r2.steps or r1.steps != base.steps:
            report.step_mismatches.append({**record, "steps": [r1.steps, r2.steps, base.steps]})
        problems, observed = relate_results(r1, r2, dist)
        report.max_distance = max(report.max_distance, observed)
        if tags_of(r1.value) != report.base_tags:
            problems.append(("tag", "value", "tags differ from the base run"))
        for what, path, detail in problems:
            entry = {**record, "path": path, "detail": detail if isinstance(detail, dict) else str(detail)}
            (report.violations if what == "distance" else report.tag_mismatches).append(entry)
        if stop_early and not report.passed:
            break
    return report


# ------------------------------------------------------------ mutations

class DropPlusSenv(Evaluator):
    name = "plus-drop-senv"

    def plus(self, a, b):
        return TaggedReal(a.value + b.value, a.senv, a.metric.join(b.metric))


class WrongJoin(Evaluator):
    name = "wrong-join"

    def plus(self, a, b):
        return TaggedReal(a.value + b.value, a.senv + b.senv, a.metric.meet(b.metric))


class SkipScalarCheck(Evaluator):
    name = "skip-scalar-check"

    def check_scalar(self, scalar):
        pass


class SkipGuardCheck(Evaluator):
    name = "skip-guard-check"

    def check_guard(self, guard):
        pass


class WrongTimesScaling(Evaluator):
    name = "wrong-times-scaling"

    def scale(self, scalar, x):
        return TaggedReal(scalar.value * x.value, x.senv, x.metric)


class TimesIgnoresMetric(Evaluator):
    """Scales every metric by ``|c|``, which is unsound for discrete values
    scaled by a fraction."""

    name = "times-ignores-metric"

    def scale(self, scalar, x):
        return TaggedReal(scalar.value * x.value, x.senv.scale(abs(scalar.value)), x.metric)


MUTATIONS = {cls.name: cls for cls in (
    DropPlusSenv, WrongJoin, SkipScalarCheck, SkipGuardCheck, WrongTimesScaling, TimesIgnoresMetric,
)}


# ------------------------------------------------------------ corpus

@dataclass
class Fixture:
    name: str
    program: object
    spec: NeighborSpec


def load_corpus(corpus_dir=None) -> list[Fixture]:
    corpus_dir = Path(corpus_dir or CORPUS_DIR)
    if not corpus_dir.is_dir():
        raise CorpusError(f"corpus directory {corpus_dir} does not exist")
    fixtures = []
    for sdl in sorted(corpus_dir.glob("*.sdl")):
        spec_path = sdl.with_suffix(".spec.json")
        if not spec_path.exists():
            raise CorpusError(f"{sdl.name} has no matching {spec_path.name}")
        spec = NeighborSpec.from_json(json.loads(spec_path.read_text()))
        fixtures.append(Fixture(sdl.stem, parse_program(sdl.read_text()), spec))
    if not fixtures:
        raise CorpusError(f"no fixtures found in {corpus_dir}")
    return fixtures


_ERRORS = {"SensitiveGuard": SensitiveGuard, "SensitiveScalar": SensitiveScalar}


def run_corpus(corpus_dir=None, trials: int = 1000, seed: int = 0,
               evaluator: Evaluator = REFERENCE, stop_early: bool = False) -> dict:
    """Check every fixture; ``summary["passed"]`` is False on any violation
    or on an expected analysis error that was not raised."""
    summary = {"evaluator": evaluator.name, "programs": [], "violations": 0, "missed_errors": 0}
    for fx in load_corpus(corpus_dir):
        entry = {"name": fx.name}
        if fx.spec.expect_error:
            try:
                _run(evaluator, fx.spec.inputs, fx.program)
            except _ERRORS[fx.spec.expect_error]:
                entry["error_raised"] = True
            else:
                entry["error_raised"] = False
                summary["missed_errors"] += 1
        else:
            n = fx.spec.trials or trials
            report = check_preservation(fx.program, fx.spec, n, seed, evaluator, stop_early)
            entry.update(trials=report.trials, passed=report.passed,
                         max_distance=report.max_distance,
                         failures=len(report.violations) + len(report.step_mismatches)
                         + len(report.tag_mismatches))
            if not report.passed:
                entry["first_failure"] = (report.violations + report.step_mismatches
                                          + report.tag_mismatches)[0]
            summary["violations"] += entry["failures"]
        summary["programs"].append(entry)
        if stop_early and (summary["violations"] or summary["missed_errors"]):
            break
    summary["passed"] = summary["violations"] == 0 and summary["missed_errors"] == 0
    return summary


def describe(summary: dict) -> str:
    lines = []
    for p in summary["programs"]:
        if "error_raised" in p:
            status = "ok" if p["error_raised"] else "MISSED ERROR"
        else:
            status = "ok" if p["passed"] else f"{p['failures']} FAILURES"
            status += f" ({p['trials']} trials, max |r1-r2| = {fmt_num(round(p['max_distance'], 6))})"
        lines.append(f"{p['name']}: {status}")
    return os.linesep.join(lines)


RULES = ("Var", "Real", "Fun", "App", "Plus", "Times-L", "Times-R", "IfZ-T", "IfZ-F",
         "Pair", "Proj", "Ref", "Read", "Write")

_NODE_RULES = {Var: "Var", Real: "Real", Lam: "Fun", App: "App", Pair: "Pair",
               Proj: "Proj", Ref: "Ref", Read: "Read", Write: "Write"}
_OP_RULES = {Op.PLUS: "Plus", Op.TIMES_L: "Times-L", Op.TIMES_R: "Times-R"}


class _GuardTracer(Evaluator):
    def __init__(self):
        super().__init__()
        self.branches = set()

    def check_guard(self, guard):
        super().check_guard(guard)
        self.branches.add("IfZ-T" if guard.value == 0 else "IfZ-F")


def rules_exercised(program, inputs) -> set[str]:
    """Evaluation rules a program uses on ``inputs``: syntax-directed rules
    are read off the tree, conditional branches are observed at run time."""
    found = set()
    stack = [program]
    while stack:
        e = stack.pop()
        if isinstance(e, BinOp):
            found.add(_OP_RULES[e.op])
        elif type(e) in _NODE_RULES:
            found.add(_NODE_RULES[type(e)])
        stack.extend(c for c in vars(e).values() if hasattr(c, "__dataclass_fields__"))
    tracer = _GuardTracer()
    try:
        _run(tracer, inputs, program)
    except AnalysisError:
        pass
    return found | tracer.branches


# ------------------------------------------------------------ gradient descent demo

DATA_SOURCE = "data"


def synthetic_dataset(n: int = 400, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Two Gaussian blobs on either side of the line x1 + x2 = 0, labels in
    {-1, +1}; features scaled so every row has norm at most 1."""
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    X = rng.normal(0.0, 0.6, size=(n, 2)) + y[:, None] * 0.8
    X /= np.linalg.norm(X, axis=1).max()
    return X, y


@dataclass
class DemoResult:
    theta: np.ndarray
    accuracy: float
    iterations: int
    charges: list  # per-source Renyi eps charges in order
    odometer: dict
    display: str

    def to_json(self) -> dict:
        return {"theta": self.theta.tolist(), "noisy_accuracy": self.accuracy,
                "iterations": self.iterations, "odometer": self.odometer}


def _logistic_grads(theta, X, y):
    margins = y * (X @ theta)
    return (-y / (1.0 + np.exp(margins)))[:, None] * X


def dp_gradient_descent_demo(dataset=None, alpha: float = 10.0, eps_per_iter: float = 0.1,
                             eps_budget: float = 2.0, seed: int = 0, eps_acc: Optional[float] = None,
                             clip: float = 1.0, rate: float = 1.0, max_iter: int = 50,
                             tol: float = 0.05) -> DemoResult:
    """Noisy clipped-gradient logistic regression under a Renyi filter.

    Each iteration spends ``eps_per_iter`` on the gradient sum and
    ``eps_acc`` on a noisy count of correct predictions. Training stops once
    the noisy accuracy moves by at most ``tol`` between iterations.
    Raises FilterHalt if the budget runs out first.
    """
    from .privacy import RenyiFilter, RenyiOdometer, renyi_gauss, renyi_gauss_vec
    from .sens import SensScalar, clipped_sum

    if not eps_budget > 0:
        raise ValueError("eps_budget must be positive")
    eps_acc = eps_per_iter if eps_acc is None else eps_acc
    X, y = synthetic_dataset(seed=seed) if dataset is None else dataset
    n = len(y)  # treated as public
    data = SensEnv({DATA_SOURCE: 1.0})
    rng = np.random.default_rng(seed)
    theta = np.zeros(X.shape[1])
    charges = []
    acc, acc_diff, iterations = 0.0, math.inf, 0

    with RenyiFilter(alpha, eps_budget), RenyiOdometer(alpha) as odo:
        while acc_diff > tol and iterations < max_iter:
            grad_sum = clipped_sum(_logistic_grads(theta, X, y), data, clip)
            noisy = renyi_gauss_vec(grad_sum, alpha, eps_per_iter, rng=rng)
            charges.append(eps_per_iter)
            theta = theta - rate * noisy / n

            correct = SensScalar(float(np.sum(np.sign(X @ theta) == y)), data, Metric.DIFF)
            new_acc = renyi_gauss(correct, alpha, eps_acc, rng=rng) / n
            charges.append(eps_acc)
            acc_diff, acc = abs(new_acc - acc), new_acc
            iterations += 1

    return DemoResult(theta, acc, iterations, charges, odo.to_json(), str(odo))
