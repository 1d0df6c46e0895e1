"""Logistic and linear model fitting for the null and full models.

Logistic fits use Newton-Raphson / IRLS with step halving so that the
(penalized) log-likelihood never decreases. An optional ridge penalty
``0.5 * lam * ||beta[1:]||^2`` leaves the intercept (column 0) unpenalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .datamodel import Dataset, interaction_matrix
from .errors import RankDeficientError, SeparationError

SCORE_TOL = 1e-8
MAX_ITER = 25
SEPARATION_EPS = 1e-10
STEP_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class NullFit:
    alpha0: np.ndarray
    mu0: np.ndarray
    converged: bool
    iterations: int
    loglik: float
    design: np.ndarray
    ridge: float | None = None
    loglik_path: tuple = ()
    message: str = ""


@dataclass(frozen=True, eq=False)
class MediationCoefficients:
    """Coefficients of the outcome model (alpha, beta_s, beta_g, gamma) and
    the expression model (phi, delta, sigma2_g)."""

    alpha: np.ndarray
    beta_s: np.ndarray
    beta_g: float
    gamma: np.ndarray
    phi: np.ndarray
    delta: np.ndarray
    sigma2_g: float
    x_mean: np.ndarray | None = None

    def __post_init__(self):
        for name in ("alpha", "beta_s", "gamma", "phi", "delta"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), float)))
        object.__setattr__(self, "beta_g", float(self.beta_g))
        object.__setattr__(self, "sigma2_g", float(self.sigma2_g))
        if not self.sigma2_g > 0:
            raise ValueError("sigma2_g must be positive")
        p = self.beta_s.shape[0]
        if self.gamma.shape[0] != p or self.delta.shape[0] != p:
            raise ValueError("beta_s, gamma and delta must have the same length")
        if self.phi.shape[0] != self.alpha.shape[0]:
            raise ValueError("alpha and phi must have the same length")


def expit(eta):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(eta, dtype=float)))


def _penalty(k: int, ridge: float | None) -> np.ndarray:
    pen = np.zeros(k)
    if ridge:
        pen[1:] = ridge
    return pen


def logistic_loglik(design, y, coef, ridge: float | None = None) -> float:
    eta = design @ coef
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    if ridge:
        ll -= 0.5 * ridge * float(np.sum(coef[1:] ** 2))
    return ll


def logistic_score(design, y, coef, ridge: float | None = None) -> np.ndarray:
    """Gradient of :func:`logistic_loglik` with respect to ``coef``."""
    return design.T @ (y - expit(design @ coef)) - _penalty(design.shape[1], ridge) * coef


def _check_rank(design, ridge):
    if ridge:
        return
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise RankDeficientError(
            f"design matrix has rank {rank} < {design.shape[1]} columns; supply a ridge penalty"
        )


def fit_logistic(design, y, ridge: float | None = None, tol: float = SCORE_TOL,
                 max_iter: int = MAX_ITER):
    """Maximize the (penalized) logistic log-likelihood.

    Returns ``(coef, mu, converged, iterations, loglik, path)``.

    Raises
    ------
    RankDeficientError
        Unpenalized fit on a rank deficient design.
    SeparationError
        Fitted probabilities collapse onto 0 or 1.
    """
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_rank(design, ridge)
    k = design.shape[1]
    pen = _penalty(k, ridge)
    ybar = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    coef = np.zeros(k)
    if np.allclose(design[:, 0], 1.0):
        coef[0] = np.log(ybar / (1 - ybar))
    ll = logistic_loglik(design, y, coef, ridge)
    path = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = expit(design @ coef)
        score = design.T @ (y - mu) - pen * coef
        if np.max(np.abs(score)) <= tol:
            converged = True
            it -= 1
            break
        w = mu * (1 - mu)
        hess = (design * w[:, None]).T @ design + np.diag(pen)
        try:
            step = scipy.linalg.solve(hess, score, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            raise SeparationError("information matrix became singular during IRLS") from None
        if np.max(np.abs(step)) <= STEP_FLOOR * (1.0 + np.max(np.abs(coef))):
            # score is at its rounding floor (large n); nothing left to gain
            converged = True
            it -= 1
            break
        t = 1.0
        for _ in range(30):
            cand = coef + t * step
            ll_new = logistic_loglik(design, y, cand, ridge)
            if ll_new >= ll - 1e-12:
                break
            t *= 0.5
        else:
            # no ascent direction left at machine precision
            converged = bool(np.max(np.abs(score)) <= np.sqrt(tol))
            break
        coef, ll = cand, ll_new
        path.append(ll)
        mu = expit(design @ coef)
        if np.min(np.minimum(mu, 1 - mu)) < SEPARATION_EPS:
            raise SeparationError(
                "fitted probabilities pinned to 0/1: outcome is (quasi-)separated by the design"
            )
    else:
        mu = expit(design @ coef)
        score = design.T @ (y - mu) - pen * coef
        converged = bool(np.max(np.abs(score)) <= tol)
    return coef, mu, converged, it, ll, tuple(path)


def fit_null_logistic(d: Dataset, extra_columns=None, ridge: float | None = None) -> NullFit:
    """Fit logit P(Y=1) = [X | extra] alpha under the null hypothesis.

    ``extra_columns`` carries G (direct-effect null) or S (indirect-effect
    null). Non-convergence within ``MAX_ITER`` iterations is reported through
    ``converged=False`` and ``message`` rather than raised.
    """
    design = d.x
    if extra_columns is not None:
        design = np.column_stack([d.x, np.asarray(extra_columns, dtype=float)])
    coef, mu, converged, it, ll, path = fit_logistic(design, d.y, ridge=ridge)
    msg = "" if converged else f"IRLS stopped after {it} iterations without meeting tol {SCORE_TOL}"
    coef.setflags(write=False)
    mu.setflags(write=False)
    return NullFit(coef, mu, converged, it, ll, design, ridge, path, msg)


def fit_linear(design, response, ridge: float | None = None):
    """Least squares (optionally ridge, intercept unpenalized). Returns (coef, residuals)."""
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float)
    if ridge:
        pen = np.diag(_penalty(design.shape[1], ridge))
        coef = scipy.linalg.solve(design.T @ design + pen, design.T @ response, assume_a="pos")
    else:
        _check_rank(design, None)
        coef = np.linalg.lstsq(design, response, rcond=None)[0]
    return coef, response - design @ coef


def fit_full_models(d: Dataset, ridge: float | None = None) -> MediationCoefficients:
    """Fit the logistic outcome model on [X | S | G | C] and the linear
    expression model G ~ [X | S].

    ``sigma2_g`` uses the residual sum of squares over n - q - p.
    """
    q, p, n = d.q, d.p, d.n
    c = interaction_matrix(d).c
    design = np.column_stack([d.x, d.s, d.g, c])
    coef, _, converged, _, _, _ = fit_logistic(design, d.y, ridge=ridge)
    if not converged:
        raise SeparationError("full outcome model did not converge")
    lin, resid = fit_linear(np.column_stack([d.x, d.s]), d.g, ridge=ridge)
    dof = n - q - p
    if dof <= 0:
        raise RankDeficientError("not enough subjects to estimate the expression variance")
    return MediationCoefficients(
        alpha=coef[:q],
        beta_s=coef[q:q + p],
        beta_g=coef[q + p],
        gamma=coef[q + p + 1:],
        phi=lin[:q],
        delta=lin[q:],
        sigma2_g=float(resid @ resid) / dof,
        x_mean=d.x.mean(axis=0),
    )
