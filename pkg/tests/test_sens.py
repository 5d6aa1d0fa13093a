import math

import numpy as np
import pytest

from senstrace.core import INF, Metric, SensEnv
from senstrace.errors import NonPositiveBound, ProbeEscape, SensitiveGuard, UnboundedSum
from senstrace.sens import (
    L1, L2, LINF, SensScalar, SensVector, clip_l1, clip_l2, clipped_sum, lift_scalar,
    lift_vector, s_map, vec_sum,
)


@pytest.fixture
def d():
    return lift_scalar(10.0, "d")


def test_wrapper_table(d):
    assert (d + 5).senv == SensEnv({"d": 1})
    assert (d + 5).metric is Metric.DIFF
    assert (d + d).senv == SensEnv({"d": 2})
    assert (d * 5).senv == SensEnv({"d": 5})
    assert (d * d).senv == SensEnv({"d": INF})


def test_display(d):
    assert str(d + d) == "Sensitive(20, {d:2}, diff)"


def test_subtraction_and_negation(d):
    assert (d - 3).value == 7 and (d - 3).senv == SensEnv({"d": 1})
    assert (3 - d).value == -7 and (3 - d).senv == SensEnv({"d": 1})
    assert (-d).senv == SensEnv({"d": 1})
    assert (d - d).senv == SensEnv({"d": 2})


def test_division(d):
    assert (d / 4).senv == SensEnv({"d": 0.25})
    assert (d / d).senv == SensEnv({"d": INF})


def test_branching_on_sensitive_value_fails(d):
    with pytest.raises(SensitiveGuard):
        bool(d)
    with pytest.raises(SensitiveGuard):
        d < 3
    with pytest.raises(SensitiveGuard):
        float(d)
    assert SensScalar(2.0) > 1


def test_zero_constant_annihilates(d):
    assert (0 * (d * d)).senv.is_zero


def test_fractional_scaling_of_discrete():
    x = lift_scalar(4.0, "q", Metric.DISC)
    assert (x * 0.5).senv == SensEnv({"q": 1})
    assert (x * 3).senv == SensEnv({"q": 3})


def test_clip_records_bound_and_metric():
    v = lift_vector([3.0, 4.0], "v")
    c = clip_l2(v, 1.0)
    assert c.metric == L2 and c.bound == 1.0
    assert np.linalg.norm(c.values) == pytest.approx(1.0)
    assert c.sensitivity == SensEnv({"v": 1.0})
    small = clip_l1(lift_vector([0.1, 0.2], "v"), 1.0)
    np.testing.assert_allclose(small.values, [0.1, 0.2])
    assert small.metric == L1


def test_clip_bound_must_be_positive():
    with pytest.raises(NonPositiveBound):
        clip_l2(lift_vector([1.0], "v"), 0)
    with pytest.raises(NonPositiveBound):
        clipped_sum([[1.0]], SensEnv({"v": 1}), -1)


def test_unclipped_sum_rejected():
    v = lift_vector([1.0, 2.0], "v")
    with pytest.raises(UnboundedSum):
        vec_sum(v)
    with pytest.raises(UnboundedSum):
        v.sensitivity


def test_vec_sum_norms():
    s1 = vec_sum(clip_l1(lift_vector([1.0, 2.0, 3.0], "v"), 2.0))
    assert s1.senv == SensEnv({"v": 2.0}) and s1.norm == "l1"
    s2 = vec_sum(clip_l2(lift_vector([1.0, 2.0, 3.0, 4.0], "v"), 2.0))
    assert s2.senv == SensEnv({"v": 4.0}) and s2.norm == "l2"


def test_clipped_sum():
    rows = [[3.0, 4.0], [0.3, 0.4], [0.0, 0.0]]
    v = clipped_sum(rows, SensEnv({"data": 1}), 1.0)
    np.testing.assert_allclose(v.values, [0.9, 1.2])
    assert v.metric == L2 and v.sensitivity == SensEnv({"data": 1.0})


def test_map_measures_sensitivity():
    v = lift_vector([1.0, 2.0, 3.0], "input")
    assert s_map(lambda x: x + x, v).senv == SensEnv({"input": 2})
    assert s_map(lambda x: x * 5, v).senv == SensEnv({"input": 5})
    assert s_map(lambda x: x + 1, v).senv == SensEnv({"input": 1})
    np.testing.assert_allclose(s_map(lambda x: x * 5, v).values, [5, 10, 15])


def test_map_charges_captured_sources_per_element():
    v = lift_vector([1.0, 2.0, 3.0], "input")
    other = lift_scalar(1.0, "other")
    assert s_map(lambda x: x + other, v).senv == SensEnv({"input": 1, "other": 3})


def test_map_constant_function():
    v = lift_vector([1.0, 2.0], "input")
    assert s_map(lambda x: 7.0, v).senv.is_zero


def test_map_probe_escape():
    v = lift_vector([1.0], "input")
    with pytest.raises(ProbeEscape):
        s_map(lambda x: [x], v)


def test_map_requires_linf():
    with pytest.raises(ValueError):
        s_map(lambda x: x, clip_l2(lift_vector([1.0], "v"), 1.0))
