import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from submaxsens.data import GroupedStudy, ingest
from submaxsens.errors import DegenerateScale, EmptyGroup
from submaxsens.scoring import (
    PsiParams, abs_median, canonical_method, psi, score, score_group_m_statistic,
    score_m_statistic, score_mean_difference,
)


def study1(d):
    return GroupedStudy.from_arrays(d, np.zeros((len(d), 0)))


@pytest.mark.parametrize("x,expected", [(0.5, 0.5), (5.0, 3.0), (0.0, 0.0), (3.0, 3.0)])
def test_psi_default(x, expected):
    assert psi(x) == expected


def test_psi_inner():
    p = PsiParams(inner=1.0, trim=3.0)
    np.testing.assert_array_equal(psi([0.5, 1.0, 2.0, 4.0], p), [0.0, 1.0, 2.0, 3.0])


@pytest.mark.parametrize("a,t", [(-1, 3), (3, 3), (4, 3)])
def test_psi_params_validation(a, t):
    with pytest.raises(ValueError):
        PsiParams(a, t)


@pytest.mark.parametrize("vals,expected", [([1, -2, 4], 2.0), ([1, -3], 2.0), ([0, 0, 0], 0.0)])
def test_abs_median(vals, expected):
    assert abs_median(vals) == expected


def test_abs_median_empty():
    with pytest.raises(ValueError):
        abs_median([])


def test_mean_difference_scores():
    s = score_mean_difference(study1([5.0, -2.5, 0.0]))
    np.testing.assert_array_equal(s.q, [5.0, 2.5, 0.0])
    np.testing.assert_array_equal(s.s, [1, -1, 0])
    np.testing.assert_array_equal(s.scale_factors, [1.0])


@pytest.mark.parametrize("d,q,sgn", [
    ([1, -2, 4], [0.5, 1, 2], [1, -1, 1]),
    ([10, -2, 2], [3, 1, 1], [1, -1, 1]),
    ([0, 1, -1], [0, 1, 1], [0, 1, -1]),
])
def test_m_statistic_scores(d, q, sgn):
    s = score_m_statistic(study1(d))
    np.testing.assert_allclose(s.q, q)
    np.testing.assert_array_equal(s.s, sgn)


def test_m_statistic_degenerate():
    with pytest.raises(DegenerateScale):
        score_m_statistic(study1([0, 0, 1]))


def test_m_statistic_inner_zeroes_sign():
    s = score_m_statistic(study1([0.1, 1, -1, 2]), PsiParams(0.5, 3))
    assert s.q[0] == 0 and s.s[0] == 0


def test_group_m_two_groups():
    study = ingest([(i, (g,), d) for i, (g, d) in enumerate(
        [(1, 1), (1, -2), (1, 4), (0, 1), (0, 100), (0, -2)])])
    s = score_group_m_statistic(study)
    np.testing.assert_allclose(s.q, [1, 2, 4, 1, 6, 2])
    np.testing.assert_array_equal(s.s, [1, -1, 1, 1, 1, -1])
    np.testing.assert_array_equal(s.scale_factors, [2, 2])


def test_group_m_errors():
    empty = ingest([(1, (1,), 1.0), (2, (1,), 2.0)])
    with pytest.raises(EmptyGroup) as e:
        score_group_m_statistic(empty)
    assert e.value.group == 1
    zero = ingest([(1, (1,), 1.0), (2, (0,), 0.0), (3, (0,), 0.0), (4, (0,), 1.0)])
    with pytest.raises(DegenerateScale) as e:
        score_group_m_statistic(zero)
    assert e.value.group == 1


def test_group_m_untrimmed_group_equals_raw():
    study = ingest([(i, (1,), d) for i, d in enumerate([1.0, -2.0, 2.5, -0.5])] + [(9, (0,), 3.0)])
    s = score_group_m_statistic(study)
    np.testing.assert_allclose(s.contributions[:4], study.d[:4], rtol=0, atol=1e-15)


def test_on_data_scale(rng):
    d = rng.standard_t(2, 101)
    study = study1(d)
    m = score(study, "m").on_data_scale()
    h0 = abs_median(d)
    assert np.max(np.abs(m)) <= 3 * h0 * (1 + 1e-15)
    np.testing.assert_allclose(m, score(study, "group-m").on_data_scale(), rtol=1e-12)


def test_method_aliases():
    assert canonical_method("group-m") == "group_m_statistic"
    assert canonical_method("M") == "m_statistic"
    assert canonical_method("md") == "mean_difference"
    with pytest.raises(ValueError):
        canonical_method("rank")


ds = st.lists(st.floats(-1e3, 1e3).filter(lambda x: abs(x) > 1e-3), min_size=3, max_size=80)


@settings(max_examples=80, deadline=None)
@given(ds)
def test_g1_reduction(d):
    study = study1(d)
    m = score_m_statistic(study)
    g = score_group_m_statistic(study)
    np.testing.assert_allclose(g.q, m.q * m.scale_factors[0], rtol=1e-12, atol=0)


@settings(max_examples=80, deadline=None)
@given(ds, st.floats(1e-3, 1e3))
def test_scale_equivariance(d, c):
    a = study1(d)
    b = a.scaled(c)
    np.testing.assert_allclose(score_m_statistic(b).q, score_m_statistic(a).q, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(score_group_m_statistic(b).q, c * score_group_m_statistic(a).q, rtol=1e-12)
    np.testing.assert_allclose(score_mean_difference(b).q, c * score_mean_difference(a).q, rtol=1e-12)


@settings(max_examples=80, deadline=None)
@given(ds, st.floats(0.5, 5))
def test_trim_bound_and_monotone(d, t):
    p = PsiParams(0, t)
    study = study1(d)
    m = score_m_statistic(study, p)
    assert np.all(m.q <= t) and np.all(m.q >= 0)
    g = score_group_m_statistic(study, p)
    assert np.all(g.q <= t * g.scale_factors[0] * (1 + 1e-15))
    order = np.argsort(np.abs(study.d), kind="stable")
    assert np.all(np.diff(m.q[order]) >= 0)
    assert np.all(np.diff(g.q[order]) >= 0)
