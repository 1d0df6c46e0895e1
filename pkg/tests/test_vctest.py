import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_k, brute_variance_term, make_dataset
from jointvct.datamodel import Dataset, MonomorphicSNPWarning, interaction_matrix
from jointvct.errors import WeightingError
from jointvct.glm import fit_null_logistic
from jointvct.vctest import (
    UNWEIGHTED,
    ScoreComponents,
    StatVariant,
    Weighting,
    compute_weights,
    k_diagonal,
    k_matrix,
    kernel_columns,
    q_statistic,
    score_components,
    variance_term,
)


def _fit(d):
    c = interaction_matrix(d)
    nf = fit_null_logistic(d)
    return c, nf, score_components(d, c, nf)


def test_k_examples():
    assert k_diagonal(np.array([0.5]))[0] == pytest.approx(0.0, abs=1e-15)
    k = k_matrix(np.array([0.5, 0.5]))
    assert k[0, 1] == pytest.approx(0.125)


def test_k_diagonal_is_bernoulli_moment_difference():
    mu = np.linspace(0.01, 0.99, 50)
    m4 = mu * (1 - mu) ** 4 + (1 - mu) * mu**4
    np.testing.assert_allclose(k_diagonal(mu), m4 - (mu * (1 - mu)) ** 2, atol=1e-15)


def test_k_matrix_loop_oracle():
    mu = np.random.default_rng(1).uniform(0.05, 0.95, 12)
    k = k_matrix(mu)
    np.testing.assert_allclose(k, brute_k(mu), atol=1e-15)
    np.testing.assert_array_equal(k, k.T)
    assert np.all(k[~np.eye(12, dtype=bool)] >= 0)


def test_k_rejects_boundary():
    with pytest.raises(ValueError):
        k_matrix(np.array([0.0, 0.5]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 25), st.integers(1, 4))
def test_variance_term_matches_elementwise(seed, n, k):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, k))
    mu = rng.uniform(0.02, 0.98, n)
    assert variance_term(z, mu) == pytest.approx(brute_variance_term(z, mu), rel=1e-10)


def test_single_ones_column_has_zero_snp_score():
    rng = np.random.default_rng(0)
    y = np.r_[np.ones(7), np.zeros(13)]
    with pytest.warns(MonomorphicSNPWarning):
        d = Dataset(y, np.ones((20, 1)), rng.normal(size=20))
    _, _, sc = _fit(d)
    assert sc.u_tau_s == pytest.approx(0.0, abs=1e-20)


def test_per_snp_factorization():
    rng = np.random.default_rng(5)
    y = (rng.random(20) < 0.5).astype(float)
    y[:2] = [1, 0]
    d = Dataset(y, rng.integers(0, 3, (20, 4)), rng.normal(size=20))
    _, nf, sc = _fit(d)
    r = d.y - nf.mu0
    assert sc.u_tau_s == pytest.approx(sum((d.s[:, j] @ r) ** 2 for j in range(4)), rel=1e-12)
    assert sc.i_tau_s == pytest.approx(brute_variance_term(d.s, nf.mu0), rel=1e-10)


def test_q_arithmetic_and_zero_scores():
    sc = ScoreComponents(8.0, 0.0, 0.0, 1.0, 1.0, 1.0)
    assert q_statistic(sc, UNWEIGHTED, "s", 4) == 2.0
    zero = ScoreComponents(0.0, 0.0, 0.0, 1.0, 2.0, 3.0)
    w = compute_weights(zero)
    for v in StatVariant:
        assert q_statistic(zero, w, v, 10) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(list(StatVariant)), st.sampled_from(list(Weighting)))
def test_kernel_form_identity(seed, variant, mode):
    d = make_dataset(seed, n=40, p=3, n_cases=17, n_cov=1)
    c, nf, sc = _fit(d)
    w = compute_weights(sc, mode)
    r = d.y - nf.mu0
    blocks = {"s": d.s, "g": d.g[:, None], "c": c.c}
    kern = sum(w.of(b) * blocks[b] @ blocks[b].T for b in variant.blocks)
    assert d.n * q_statistic(sc, w, variant, d.n) == pytest.approx(r @ kern @ r, rel=1e-10)
    v = kernel_columns(d, c, w, variant)
    np.testing.assert_allclose(v @ v.T, kern, rtol=1e-12, atol=1e-12)


def test_weights_definition():
    d = make_dataset(2, n=60, p=3)
    _, _, sc = _fit(d)
    w = compute_weights(sc, "weighted")
    assert w.a1 == 1.0
    assert w.a2 == pytest.approx((sc.i_g / sc.i_tau_s) ** -0.5)
    assert w.a3 == pytest.approx((sc.i_tau_i / sc.i_tau_s) ** -0.5)
    assert compute_weights(sc, "unweighted") == UNWEIGHTED


@pytest.mark.parametrize("kappa", [0.01, -3.0, 250.0])
def test_weighted_sg_scale_invariant(kappa):
    d = make_dataset(8, n=80, p=4, n_cases=30)
    e = Dataset(d.y, d.s, kappa * d.g, d.x)
    _, _, sc_d = _fit(d)
    _, _, sc_e = _fit(e)
    assert sc_e.i_g == pytest.approx(kappa**4 * sc_d.i_g, rel=1e-9)
    qd = q_statistic(sc_d, compute_weights(sc_d), "sg", d.n)
    qe = q_statistic(sc_e, compute_weights(sc_e), "sg", d.n)
    assert qe == pytest.approx(qd, rel=1e-9)
    qu_d = q_statistic(sc_d, UNWEIGHTED, "sg", d.n)
    qu_e = q_statistic(sc_e, UNWEIGHTED, "sg", d.n)
    assert qu_e != pytest.approx(qu_d, rel=1e-3)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_sgc_dominates_sub_sums(seed):
    d = make_dataset(seed, n=50, p=2, n_cases=20)
    _, _, sc = _fit(d)
    w = compute_weights(sc)
    q = {v: q_statistic(sc, w, v, d.n) for v in StatVariant}
    assert q[StatVariant.SGC] >= max(q[StatVariant.SG], q[StatVariant.DE], q[StatVariant.IE])
    assert q[StatVariant.SG] >= q[StatVariant.S] >= 0


def test_constant_expression():
    d = Dataset([1, 0, 1, 0, 1, 0], [[0], [1], [2], [0], [1], [2]], np.full(6, 3.0))
    _, _, sc = _fit(d)
    with pytest.raises(WeightingError, match="unweighted"):
        compute_weights(sc, "weighted")
    assert sc.u_beta_g == pytest.approx(0.0, abs=1e-12)
    assert q_statistic(sc, UNWEIGHTED, "sg", 6) == pytest.approx(q_statistic(sc, UNWEIGHTED, "s", 6))
