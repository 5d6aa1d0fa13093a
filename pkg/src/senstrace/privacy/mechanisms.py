"""Differentially private mechanisms over sensitive values.

Each mechanism checks the metric of its input, calibrates noise to the
largest per-source sensitivity, charges every contributing source through
the active accountants and only then draws noise. Outputs are plain
floats: post-processing them costs nothing.
"""
from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from ..core import Metric, SensEnv, Z
from ..errors import (
    DeltaOutOfRange, EmptyOptions, InfiniteSensitivity, MetricIncompatible,
    NoQueryAboveThreshold, QuerySensitivityViolation,
)
from ..sens import L2_NORM, SensScalar, SensVector, as_scalar
from .accounting import EdCost, EpsCost, RenyiCost, charge

_rng = np.random.default_rng()


def seed(value: Optional[int]) -> np.random.Generator:
    """Reseed the stream used when a mechanism is called without ``rng``."""
    global _rng
    _rng = np.random.default_rng(value)
    return _rng


def _stream(rng):
    return _rng if rng is None else rng


def _check_eps(eps):
    if not eps > 0:
        raise ValueError(f"epsilon must be positive, got {eps}")


def _scalar_sensitivity(x: SensScalar, mechanism: str, allow_l2: bool) -> float:
    if x.metric not in (Metric.DIFF, Metric.BOT):
        raise MetricIncompatible(f"{mechanism} needs an absolute-difference value, got {x.metric}")
    if x.norm == L2_NORM and not allow_l2:
        raise MetricIncompatible(f"{mechanism} cannot use an L2-derived sensitivity")
    delta = x.senv.max()
    if math.isinf(delta):
        raise InfiniteSensitivity(f"{mechanism}: value has infinite sensitivity in {sorted(x.senv)}")
    return delta


def _vector_sensitivity(v: SensVector, mechanism: str, allowed: tuple) -> float:
    if v.metric.kind not in allowed or v.bound is None:
        raise MetricIncompatible(f"{mechanism} needs a clipped {'/'.join(allowed)} vector, got {v.metric}")
    delta = v.sensitivity.max()
    if math.isinf(delta):
        raise InfiniteSensitivity(f"{mechanism}: vector has infinite sensitivity")
    return delta


def gauss_sigma(sensitivity: float, eps: float, delta: float) -> float:
    return sensitivity * math.sqrt(2 * math.log(1.25 / delta)) / eps


def renyi_sigma(sensitivity: float, alpha: float, eps: float) -> float:
    return sensitivity * math.sqrt(alpha / (2 * eps))


def _check_delta(delta):
    if not 0 < delta < 1:
        raise DeltaOutOfRange(f"delta must lie in (0, 1), got {delta}")


def _check_alpha(alpha):
    if not alpha > 1:
        raise ValueError(f"Renyi order must exceed 1, got {alpha}")


def laplace(x, eps: float, rng=None) -> float:
    """Laplace mechanism with scale sensitivity/eps; costs eps."""
    _check_eps(eps)
    x = as_scalar(x)
    b = _scalar_sensitivity(x, "laplace", allow_l2=False) / eps
    charge(x.senv, EpsCost(eps))
    return x.value + (_stream(rng).laplace(0.0, b) if b > 0 else 0.0)


def gauss(x, eps: float, delta: float, rng=None) -> float:
    """Gaussian mechanism calibrated for (eps, delta)-DP."""
    _check_eps(eps)
    _check_delta(delta)
    x = as_scalar(x)
    sigma = gauss_sigma(_scalar_sensitivity(x, "gauss", allow_l2=True), eps, delta)
    charge(x.senv, EdCost(eps, delta))
    return x.value + (_stream(rng).normal(0.0, sigma) if sigma > 0 else 0.0)


def renyi_gauss(x, alpha: float, eps: float, rng=None) -> float:
    """Gaussian mechanism calibrated for (alpha, eps)-Renyi DP."""
    _check_alpha(alpha)
    _check_eps(eps)
    x = as_scalar(x)
    sigma = renyi_sigma(_scalar_sensitivity(x, "renyi_gauss", allow_l2=True), alpha, eps)
    charge(x.senv, RenyiCost(alpha, eps))
    return x.value + (_stream(rng).normal(0.0, sigma) if sigma > 0 else 0.0)


def gauss_vec(v: SensVector, eps: float, delta: float, rng=None) -> np.ndarray:
    _check_eps(eps)
    _check_delta(delta)
    sigma = gauss_sigma(_vector_sensitivity(v, "gauss_vec", ("L1", "L2")), eps, delta)
    charge(v.senv, EdCost(eps, delta))
    return v.values + _stream(rng).normal(0.0, sigma, size=len(v))


def renyi_gauss_vec(v: SensVector, alpha: float, eps: float, rng=None) -> np.ndarray:
    _check_alpha(alpha)
    _check_eps(eps)
    sigma = renyi_sigma(_vector_sensitivity(v, "renyi_gauss_vec", ("L1", "L2")), alpha, eps)
    charge(v.senv, RenyiCost(alpha, eps))
    return v.values + _stream(rng).normal(0.0, sigma, size=len(v))


def _senv_of(x) -> SensEnv:
    return getattr(x, "senv", Z)


def svt(queries: Sequence[Callable], data, threshold: float, eps: float, rng=None) -> int:
    """AboveThreshold: index of the first query whose noisy answer clears a
    noisy threshold. Costs eps once however many queries are inspected."""
    _check_eps(eps)
    answers = []
    senv = _senv_of(data)
    for i, q in enumerate(queries):
        a = as_scalar(q(data))
        if a.senv.max() > 1:
            raise QuerySensitivityViolation(f"query {i} has sensitivity {a.senv.max()} > 1")
        answers.append(a.value)
        senv = senv + SensEnv((o, 1.0) for o in a.senv)
    charge(senv, EpsCost(eps))
    g = _stream(rng)
    noisy_threshold = threshold + g.laplace(0.0, 2 / eps)
    for i, a in enumerate(answers):
        if a + g.laplace(0.0, 4 / eps) >= noisy_threshold:
            return i
    raise NoQueryAboveThreshold(f"none of {len(answers)} queries cleared the threshold")


def exponential(options: Sequence, score: Callable, data, eps: float, sensitivity: float, rng=None):
    """Pick an option with probability proportional to
    exp(eps * score / (2 * sensitivity)); costs eps."""
    _check_eps(eps)
    if not sensitivity > 0:
        raise ValueError(f"score sensitivity must be positive, got {sensitivity}")
    if not options:
        raise EmptyOptions("exponential mechanism needs at least one option")
    senv = _senv_of(data)
    scores = []
    for r in options:
        s = as_scalar(score(data, r))
        scores.append(s.value)
        senv = senv + SensEnv((o, 1.0) for o in s.senv)
    charge(senv, EpsCost(eps))
    logits = eps * np.asarray(scores, dtype=float) / (2 * sensitivity)
    logits -= logits.max()
    p = np.exp(logits)
    p /= p.sum()
    return options[int(_stream(rng).choice(len(options), p=p))]
