import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import newton_logistic
from jointvct.datamodel import Dataset, interaction_matrix
from jointvct.errors import RankDeficientError, SeparationError
from jointvct.glm import (
    fit_full_models,
    fit_linear,
    fit_logistic,
    fit_null_logistic,
    logistic_loglik,
    logistic_score,
)


def test_intercept_only_balanced():
    d = Dataset([1, 1, 0, 0], [[0], [1], [2], [1]], [0.1, 0.2, 0.3, 0.4])
    nf = fit_null_logistic(d)
    assert nf.converged
    np.testing.assert_allclose(nf.alpha0, [0.0], atol=1e-12)
    np.testing.assert_allclose(nf.mu0, 0.5)


def test_intercept_only_closed_form():
    y = np.zeros(100)
    y[:30] = 1
    rng = np.random.default_rng(0)
    d = Dataset(y, rng.integers(0, 3, (100, 2)), rng.normal(size=100))
    nf = fit_null_logistic(d)
    np.testing.assert_allclose(nf.alpha0, [np.log(3 / 7)], atol=1e-10)
    np.testing.assert_allclose(nf.mu0, 0.3, atol=1e-10)


def test_matches_independent_newton():
    rng = np.random.default_rng(11)
    design = np.column_stack([np.ones(200), rng.normal(size=(200, 2))])
    y = (rng.random(200) < 1 / (1 + np.exp(-(design @ [0.3, 0.8, -0.5])))).astype(float)
    coef, mu, converged, *_ = fit_logistic(design, y)
    assert converged
    np.testing.assert_allclose(coef, newton_logistic(design, y), atol=1e-8)


def test_score_equation_at_convergence():
    rng = np.random.default_rng(2)
    n = 150
    x = np.column_stack([np.ones(n), rng.normal(size=n)])
    y = (rng.random(n) < 0.4).astype(float)
    d = Dataset(y, rng.integers(0, 3, (n, 3)), rng.normal(size=n), x)
    nf = fit_null_logistic(d)
    assert np.max(np.abs(x.T @ (y - nf.mu0))) <= 1e-8
    assert np.all((nf.mu0 > 0) & (nf.mu0 < 1))


def test_extra_columns_enter_design():
    rng = np.random.default_rng(4)
    n = 120
    g = rng.normal(size=n)
    y = (rng.random(n) < 1 / (1 + np.exp(-g))).astype(float)
    d = Dataset(y, rng.integers(0, 3, (n, 2)), g)
    nf = fit_null_logistic(d, g[:, None])
    assert nf.design.shape == (n, 2)
    np.testing.assert_allclose(nf.alpha0, newton_logistic(nf.design, y), atol=1e-8)


def test_rank_deficient_raises_and_ridge_recovers():
    rng = np.random.default_rng(5)
    n = 80
    s = rng.integers(0, 3, (n, 1)).astype(float)
    design = np.column_stack([np.ones(n), s, s])
    y = (rng.random(n) < 0.5).astype(float)
    with pytest.raises(RankDeficientError):
        fit_logistic(design, y)
    coef, _, converged, *_ = fit_logistic(design, y, ridge=1e-4 * n)
    assert converged
    assert coef[1] == pytest.approx(coef[2])


def test_separation_detected():
    x = np.linspace(-1, 1, 40)
    design = np.column_stack([np.ones(40), x])
    y = (x > 0).astype(float)
    with pytest.raises(SeparationError):
        fit_logistic(design, y, max_iter=200)


def test_ridge_continuity_at_zero():
    rng = np.random.default_rng(6)
    design = np.column_stack([np.ones(300), rng.normal(size=(300, 3))])
    y = (rng.random(300) < 0.45).astype(float)
    free = fit_logistic(design, y)[0]
    tiny = fit_logistic(design, y, ridge=1e-9)[0]
    np.testing.assert_allclose(tiny, free, atol=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(30, 120), st.integers(1, 4))
def test_irls_loglik_monotone(seed, n, k):
    rng = np.random.default_rng(seed)
    design = np.column_stack([np.ones(n), rng.normal(size=(n, k))])
    eta = design @ rng.normal(0, 0.7, size=k + 1)
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    if y.min() == y.max():
        return
    try:
        *_, path = fit_logistic(design, y)
    except SeparationError:
        return
    assert np.all(np.diff(path) >= -1e-12)


def test_score_matches_finite_differences():
    rng = np.random.default_rng(8)
    design = np.column_stack([np.ones(60), rng.normal(size=(60, 2))])
    y = (rng.random(60) < 0.5).astype(float)
    coef = np.array([0.1, -0.4, 0.7])
    for ridge in (None, 2.0):
        h = 1e-5
        num = np.array([(logistic_loglik(design, y, coef + h * e, ridge)
                         - logistic_loglik(design, y, coef - h * e, ridge)) / (2 * h)
                        for e in np.eye(3)])
        ana = logistic_score(design, y, coef, ridge)
        np.testing.assert_allclose(ana, num, rtol=1e-6, atol=1e-6)


def test_ols_residuals_orthogonal():
    rng = np.random.default_rng(9)
    design = np.column_stack([np.ones(50), rng.normal(size=(50, 3))])
    resp = rng.normal(size=50)
    _, resid = fit_linear(design, resp)
    assert np.max(np.abs(design.T @ resid)) < 1e-10


def _cohort(seed, n, delta):
    rng = np.random.default_rng(seed)
    s = rng.binomial(2, 0.3, size=(n, 2)).astype(float)
    g = s @ np.asarray(delta, float) + rng.normal(0, 1.2, size=n)
    eta = -0.2 + 0.2 * s[:, 0] + 0.2 * g
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    return Dataset(y, s, g)


def test_full_models_recover_delta():
    mc = fit_full_models(_cohort(21, 100_000, [1.0, 0.0]))
    assert abs(mc.delta[0] - 1.0) < 0.02
    assert mc.sigma2_g == pytest.approx(1.44, rel=0.02)
    assert mc.beta_g == pytest.approx(0.2, abs=0.03)


def test_full_models_null_delta():
    d = _cohort(22, 100_000, [0.0, 0.0])
    mc = fit_full_models(d)
    design = np.column_stack([d.x, d.s])
    cov = mc.sigma2_g * np.linalg.inv(design.T @ design)
    se = np.sqrt(np.diag(cov))[1:]
    assert np.all(np.abs(mc.delta) < 3 * se)


def test_full_model_layout():
    d = _cohort(23, 2000, [1.0, 0.5])
    mc = fit_full_models(d)
    c = interaction_matrix(d).c
    design = np.column_stack([d.x, d.s, d.g, c])
    oracle = newton_logistic(design, d.y)
    np.testing.assert_allclose(np.concatenate([mc.alpha, mc.beta_s, [mc.beta_g], mc.gamma]),
                               oracle, atol=1e-7)
    np.testing.assert_allclose(mc.x_mean, [1.0])
