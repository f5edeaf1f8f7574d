import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr, ndtri

from submaxsens import mvnorm
from submaxsens.errors import NumericalError
from submaxsens.mvnorm import (
    MvnAccuracyWarning, MvnSettings, critical_value, critical_value_bracket, equicoordinate_prob,
    max_normal_quantile_mc, sov_factor,
)
from submaxsens.submax import build_comparisons, correlation

BALANCED = correlation((build_comparisons(2).C.astype(float)) @ build_comparisons(2).C.T.astype(float))


def test_balanced_design_entries():
    off = np.sort(np.unique(np.round(BALANCED[np.triu_indices(5, 1)], 12)))
    np.testing.assert_allclose(off, [0.0, 0.5, 1 / np.sqrt(2)])


def test_k1(kernel):
    p, se = equicoordinate_prob(1.6449, np.eye(1))
    assert p == pytest.approx(ndtr(1.6449), abs=1e-12) and se == 0
    assert critical_value(np.eye(1)) == pytest.approx(1.6449, abs=2e-3)


def test_independent_pair(kernel):
    p, _ = equicoordinate_prob(1.96, np.eye(2))
    assert p == pytest.approx(0.95063, abs=1e-3)
    assert critical_value(np.eye(2)) == pytest.approx(ndtri(np.sqrt(0.95)), abs=3e-3)


def test_comonotone(kernel):
    p, _ = equicoordinate_prob(1.6449, np.ones((3, 3)))
    assert p == pytest.approx(0.95, abs=1e-4)
    assert critical_value(np.ones((3, 3))) == pytest.approx(1.6449, abs=2e-3)


@pytest.mark.parametrize("K", [1, 2, 5, 10])
@pytest.mark.parametrize("kappa", [0.0, 1.0, 2.0, 3.0])
def test_diagonal_product_form(K, kappa):
    p, se = equicoordinate_prob(kappa, np.eye(K))
    assert p == pytest.approx(ndtr(kappa) ** K, abs=1e-3)
    assert se <= 5e-4


def test_balanced_kappa(kernel):
    k = critical_value(BALANCED)
    assert 2.10 <= k <= 2.30
    # rank-3 matrix: the solver works in the rank
    assert sov_factor(BALANCED).rank == 3


def test_monotone_in_kappa():
    ps = [equicoordinate_prob(k, BALANCED) for k in np.linspace(0, 3, 13)]
    for (p0, s0), (p1, s1) in zip(ps, ps[1:]):
        assert p1 > p0 - 3 * max(s0, s1)


def test_deterministic_given_seed():
    s = MvnSettings(seed=99)
    assert equicoordinate_prob(2.0, BALANCED, s) == equicoordinate_prob(2.0, BALANCED, s)


def test_near_singular_clipped():
    rho = np.full((4, 4), 1 - 1e-13)
    np.fill_diagonal(rho, 1.0)
    p, _ = equicoordinate_prob(1.0, rho)
    assert p == pytest.approx(ndtr(1.0), abs=1e-3)


@pytest.mark.parametrize("rho", [
    np.array([[1, 0.5], [0.4, 1]]),
    np.array([[1.1, 0], [0, 1]]),
    np.array([[1, 0.9, 0.9], [0.9, 1, -0.9], [0.9, -0.9, 1]]),
    np.eye(26),
    np.array([[1, np.nan], [np.nan, 1]]),
])
def test_invalid_rho(rho):
    with pytest.raises(NumericalError):
        equicoordinate_prob(1.0, rho)


def test_settings_validation():
    with pytest.raises(ValueError):
        MvnSettings(target_se=0)
    with pytest.raises(ValueError):
        MvnSettings(max_samples=100)


def test_accuracy_warning():
    rho = np.full((6, 6), 0.3)
    np.fill_diagonal(rho, 1)
    with pytest.warns(MvnAccuracyWarning):
        equicoordinate_prob(1.0, rho, MvnSettings(target_se=1e-9, max_samples=2048))


def test_alpha_validation():
    with pytest.raises(ValueError):
        critical_value(np.eye(2), alpha=1.0)


def test_backends_agree():
    if len(mvnorm.KERNELS) < 2:
        pytest.skip("compiled kernel not built")
    f = sov_factor(BALANCED)
    pts = mvnorm._points(1, f.dim, 256)
    a = mvnorm.KERNELS["python"].shift_means(2.1, f.lead, f.coef, f.scale, f.upper, f.rank, pts)
    b = mvnorm.KERNELS["cython"].shift_means(2.1, f.lead, f.coef, f.scale, f.upper, f.rank, pts)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)
    ka = mvnorm.KERNELS["python"].solve(0.95, 1.6, 2.5, 1e-4, 100, f.lead, f.coef, f.scale, f.upper, f.rank, pts)
    kb = mvnorm.KERNELS["cython"].solve(0.95, 1.6, 2.5, 1e-4, 100, f.lead, f.coef, f.scale, f.upper, f.rank, pts)
    assert ka[0] == pytest.approx(kb[0], abs=1e-12) and ka[2:] == kb[2:]


def test_mc_oracle_small():
    k = max_normal_quantile_mc(BALANCED, 0.05, draws=400_000, seed=1)
    assert k == pytest.approx(critical_value(BALANCED), abs=0.02)


def _random_nonneg_rho(seed, K):
    rng = np.random.default_rng(seed)
    C = rng.integers(0, 2, size=(K, 6))
    C[C.sum(axis=1) == 0, 0] = 1
    return correlation((C * rng.uniform(0.1, 2, 6)) @ C.T)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 9), st.floats(0, 3))
def test_slepian_bracket(seed, K, kappa):
    rho = _random_nonneg_rho(seed, K)
    p, se = equicoordinate_prob(kappa, rho)
    tol = 4 * se + 1e-12
    assert ndtr(kappa) ** K - tol <= p <= ndtr(kappa) + tol


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 9), st.sampled_from([0.01, 0.05, 0.2]))
def test_kappa_bracket(seed, K, alpha):
    rho = _random_nonneg_rho(seed, K)
    lo, hi = critical_value_bracket(K, alpha)
    k = critical_value(rho, alpha)
    assert lo - 1e-12 <= k <= hi + 1e-12
    p, se = equicoordinate_prob(k, rho)
    assert p == pytest.approx(1 - alpha, abs=1e-4 + 4 * se)
